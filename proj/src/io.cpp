#include "med/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace med {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw MedError("format_double: conversion failed");
    return {buf, end};
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw MedError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw MedError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw MedError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MedError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void coord_header(std::string& out, std::size_t p) {
    for (std::size_t l = 0; l < p; ++l) {
        if (l) out += ',';
        out += 'x';
        out += std::to_string(l + 1);
    }
}

void append_row(std::string& out, std::span<const double> x) {
    for (std::size_t l = 0; l < x.size(); ++l) {
        if (l) out += ',';
        out += format_double(x[l]);
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string design_csv(const Design& d) {
    std::string out;
    coord_header(out, d.dim());
    out += ",logf,stage\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        append_row(out, d.points[i]);
        out += ',';
        out += i < d.logf.size() ? format_double(d.logf[i]) : "0";
        out += ',';
        out += std::to_string(i < d.stage.size() ? d.stage[i] : 0);
        out += '\n';
    }
    return out;
}

std::string ledger_csv(const EvaluationLedger& ledger, std::size_t dim) {
    std::string out = "seq,stage,";
    coord_header(out, dim);
    out += ",logf,duration_ms\n";
    for (const auto& r : ledger.records()) {
        out += std::to_string(r.seq);
        out += ',';
        out += std::to_string(r.stage);
        out += ',';
        append_row(out, r.x);
        out += ',';
        out += format_double(r.logf);
        out += ',';
        out += format_double(r.duration_ms);
        out += '\n';
    }
    return out;
}

std::string samples_csv(const PointSet& samples, const std::vector<int>& chain) {
    std::string out;
    coord_header(out, samples.dim());
    out += ",chain\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        append_row(out, samples[i]);
        out += ',';
        out += std::to_string(i < chain.size() ? chain[i] : 0);
        out += '\n';
    }
    return out;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return c;
    throw MedError("missing column '" + name + "'");
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            for (auto& c : cells) t.header.push_back(trim(c));
            continue;
        }
        if (cells.size() != t.header.size())
            throw MedError(source + ": line " + std::to_string(lineno) + ": expected " +
                           std::to_string(t.header.size()) + " cells, found " +
                           std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::string cell = trim(cells[c]);
            const char* b = cell.data();
            const char* e = b + cell.size();
            auto [ptr, ec] = std::from_chars(b, e, row[c]);
            if (cell.empty() || ec != std::errc() || ptr != e)
                throw MedError(source + ": line " + std::to_string(lineno) + ", column " +
                               std::to_string(c + 1) + " ('" + t.header[c] +
                               "'): not a number: '" + cell + "'");
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw MedError(source + ": empty file");
    return t;
}

Design read_design(const fs::path& path) {
    CsvTable t = parse_csv(read_file(path), path.string());
    std::size_t p = 0;
    while (true) {
        bool found = false;
        for (auto& h : t.header) found = found || h == "x" + std::to_string(p + 1);
        if (!found) break;
        ++p;
    }
    if (p == 0) throw MedError(path.string() + ": no coordinate columns x1..xp");
    std::vector<std::size_t> xc(p);
    for (std::size_t l = 0; l < p; ++l) xc[l] = t.column("x" + std::to_string(l + 1));
    std::ptrdiff_t lc = -1, sc = -1;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == "logf") lc = static_cast<std::ptrdiff_t>(c);
        if (t.header[c] == "stage") sc = static_cast<std::ptrdiff_t>(c);
    }
    Design d;
    d.points = PointSet(p);
    Point x(p);
    for (auto& row : t.rows) {
        for (std::size_t l = 0; l < p; ++l) x[l] = row[xc[l]];
        d.points.push_back(x);
        d.logf.push_back(lc >= 0 ? row[lc] : 0.0);
        d.stage.push_back(sc >= 0 ? static_cast<int>(row[sc]) : 0);
    }
    return d;
}

std::vector<LedgerRow> read_ledger(const fs::path& path) {
    CsvTable t = parse_csv(read_file(path), path.string());
    const std::size_t seq = t.column("seq");
    const std::size_t stage = t.column("stage");
    const std::size_t logf = t.column("logf");
    std::vector<std::size_t> xc;
    for (std::size_t l = 1;; ++l) {
        bool found = false;
        for (auto& h : t.header) found = found || h == "x" + std::to_string(l);
        if (!found) break;
        xc.push_back(t.column("x" + std::to_string(l)));
    }
    if (xc.empty()) throw MedError(path.string() + ": no coordinate columns x1..xp");
    std::vector<LedgerRow> out;
    for (auto& row : t.rows) {
        LedgerRow r;
        r.seq = static_cast<std::uint64_t>(row[seq]);
        r.stage = static_cast<int>(row[stage]);
        for (auto c : xc) r.x.push_back(row[c]);
        r.logf = row[logf];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace med
