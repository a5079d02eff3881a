#include "outraj/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace outraj {

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void Table::add(const std::string& name, std::vector<double> column) {
    header.push_back(name);
    columns.push_back(std::move(column));
}

void write_csv(const std::string& path, const Table& table) {
    if (table.header.size() != table.columns.size())
        throw std::logic_error("csv table: header/column count mismatch");
    const std::size_t rows = table.columns.empty() ? 0 : table.columns[0].size();
    for (const auto& c : table.columns)
        if (c.size() != rows) throw std::logic_error("csv table: ragged columns");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (j) out << ',';
        out << table.header[j];
    }
    out << '\n';
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            if (j) out << ',';
            out << format_g17(table.columns[j][i]);
        }
        out << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

void append_line(const std::string& path, const std::string& line) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot open for appending: " + path);
    out << line << '\n';
    out.flush();
    if (!out) throw std::runtime_error("append failed: " + path);
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    return h;
}

std::string fnv1a_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool files_identical(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) throw std::runtime_error("cannot open files for comparison");
    std::istreambuf_iterator<char> ia(fa), ib(fb), end;
    while (ia != end && ib != end)
        if (*ia++ != *ib++) return false;
    return ia == end && ib == end;
}

}  // namespace outraj
