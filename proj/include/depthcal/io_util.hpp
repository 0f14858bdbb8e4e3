// Small text-file helpers shared by the model, config and CSV writers.
#pragma once

#include <map>
#include <string>
#include <vector>

namespace depthcal {

// Writes via a temp file in the same directory plus rename, so a failed
// command never leaves a partial output file behind.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Parses "key = value" lines; '#' starts a comment; blank lines ignored.
// Duplicate keys are a FormatError.
std::map<std::string, std::string> read_key_value_file(const std::string& path);

const std::string& require_key(const std::map<std::string, std::string>& kv,
                               const std::string& key,
                               const std::string& context);

double parse_double(const std::string& text, const std::string& context);
long parse_long(const std::string& text, const std::string& context);
bool parse_bool(const std::string& text, const std::string& context);

// Shortest decimal that round-trips the double exactly.
std::string format_full(double v);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

// Whitespace-separated tokens, runs of blanks collapsed.
std::vector<std::string> split_tokens(const std::string& s);

}  // namespace depthcal
