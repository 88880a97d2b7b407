#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Small text and file helpers shared by the readers and writers.
namespace srpc {

std::string_view trim(std::string_view s);
std::string_view unquote(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Shortest representation that round-trips through strtod.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// FNV-1a, used to fingerprint input files in run manifests.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

// One CSV row per draw; header given by `columns`.
std::string format_matrix_csv(const std::vector<std::string>& columns, std::span<const double> values,
                              std::size_t rows);
std::vector<std::vector<double>> parse_numeric_csv(const std::string& text,
                                                   std::vector<std::string>* header = nullptr);

}  // namespace srpc
