#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace outraj {

inline constexpr const char* kVersion = "0.1.0";

// Fixed 17-significant-digit formatting; round-trips any double exactly.
std::string format_g17(double x);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    void add(const std::string& name, std::vector<double> column);
};

// Header row plus g17-formatted data rows, '\n' line ends, written atomically
// enough for our purposes (single process). Throws on ragged columns or IO
// failure.
void write_csv(const std::string& path, const Table& table);

void ensure_directory(const std::string& path);
void append_line(const std::string& path, const std::string& line);

std::uint64_t fnv1a_file(const std::string& path);
std::string fnv1a_hex(std::uint64_t h);
bool files_identical(const std::string& a, const std::string& b);

}  // namespace outraj
