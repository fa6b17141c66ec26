#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "levyexit/estimator.hpp"
#include "levyexit/nonlocal_solver.hpp"

namespace levyexit {

class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& path, std::size_t line, const std::string& message)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

// Shortest representation that parses back to the identical double; always
// uses '.' regardless of locale.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_csv_double(std::string_view field, const std::string& path,
                               std::size_t line) {
    // trim surrounding spaces
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
        field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
        field.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw CsvError(path, line, "malformed number '" + std::string(field) + "'");
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

// Write the full content to <path>.tmp and rename into place, so a failure
// never leaves a partial output file behind.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot rename temporary file onto '" + path.string() + "'");
    }
}

} // namespace detail

/// Write a profile as CSV: header `x,value` (plus `,stderr` when standard
/// errors are present), one row per node in ascending x, full double
/// precision. The file appears atomically or not at all.
inline void write_profile(const Profile& profile, const std::filesystem::path& path) {
    if (profile.xs.size() != profile.values.size())
        throw std::invalid_argument("write_profile: inconsistent profile");
    const bool with_stderr = !profile.stderrs.empty();
    if (with_stderr && profile.stderrs.size() != profile.xs.size())
        throw std::invalid_argument("write_profile: inconsistent stderr column");
    std::string out = with_stderr ? "x,value,stderr\n" : "x,value\n";
    for (std::size_t i = 0; i < profile.xs.size(); ++i) {
        out += detail::format_double(profile.xs[i]);
        out += ',';
        out += detail::format_double(profile.values[i]);
        if (with_stderr) {
            out += ',';
            out += detail::format_double(profile.stderrs[i]);
        }
        out += '\n';
    }
    detail::write_text_atomic(path, out);
}

/// Read observations from CSV with header `x,value` (an optional third column
/// is accepted and ignored). Rows are sorted by x; duplicate x values are
/// rejected, as are escape probabilities outside [0, 1].
inline ObservationSet read_observations(const std::filesystem::path& path, ProfileKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open observation file '" + path.string() + "'");
    const std::string name = path.string();

    std::string line;
    if (!std::getline(in, line)) throw CsvError(name, 1, "empty file, expected header 'x,value'");
    {
        auto fields = detail::split_fields(line);
        const auto trim = [](std::string_view f) {
            while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
            while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r'))
                f.remove_suffix(1);
            return f;
        };
        if (fields.size() < 2 || fields.size() > 3 || trim(fields[0]) != "x" ||
            trim(fields[1]) != "value")
            throw CsvError(name, 1, "expected header 'x,value'");
    }

    struct Row {
        double x, value;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv(line);
        if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
        if (sv.empty()) continue;
        auto fields = detail::split_fields(sv);
        if (fields.size() < 2 || fields.size() > 3)
            throw CsvError(name, lineno, "expected 2 or 3 comma-separated fields");
        const double x = detail::parse_csv_double(fields[0], name, lineno);
        const double v = detail::parse_csv_double(fields[1], name, lineno);
        if (kind == ProfileKind::escape_probability && (v < 0.0 || v > 1.0))
            throw CsvError(name, lineno,
                           "escape probability " + detail::format_double(v) + " outside [0, 1]");
        rows.push_back({x, v, lineno});
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.x < b.x; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].x == rows[i - 1].x)
            throw CsvError(name, rows[i].line,
                           "duplicate x value " + detail::format_double(rows[i].x));

    ObservationSet obs;
    obs.kind = kind;
    obs.xs.reserve(rows.size());
    obs.values.reserve(rows.size());
    for (const Row& r : rows) {
        obs.xs.push_back(r.x);
        obs.values.push_back(r.value);
    }
    return obs;
}

} // namespace levyexit
