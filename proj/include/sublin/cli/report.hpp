#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sublin/errors.hpp"

namespace sublin::cli {

/// Shortest round-trip decimal form; fixed formatting keeps CSVs byte-stable.
inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string flag(bool b) { return b ? "true" : "false"; }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) {
        if (row.size() != header_.size()) throw Error("csv: row width does not match header");
        rows_.push_back(std::move(row));
    }

    std::size_t rows() const { return rows_.size(); }

    std::string str() const {
        std::ostringstream os;
        write_row(os, header_);
        for (const auto& r : rows_) write_row(os, r);
        return os.str();
    }

private:
    static void write_row(std::ostream& os, const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) os << ',';
            const auto& cell = row[i];
            if (cell.find_first_of(",\"\n") != std::string::npos) {
                os << '"';
                for (char c : cell) os << (c == '"' ? "\"\"" : std::string(1, c));
                os << '"';
            } else {
                os << cell;
            }
        }
        os << '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Output files collected in memory and committed together. Each file is
/// written to a hidden temporary in the target directory and renamed into
/// place, so readers never see a partial file.
class OutputSet {
public:
    void put(const std::string& name, std::string content) { files_[name] = std::move(content); }

    const std::map<std::string, std::string>& files() const { return files_; }

    void commit(const std::filesystem::path& dir) const {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error("output: cannot create directory '" + dir.string() + "': " + ec.message());
        std::vector<std::pair<fs::path, fs::path>> staged;
        for (const auto& [name, content] : files_) {
            const fs::path tmp = dir / ("." + name + ".tmp");
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << content;
            out.close();
            if (!out) {
                for (const auto& s : staged) fs::remove(s.first, ec);
                fs::remove(tmp, ec);
                throw Error("output: cannot write '" + tmp.string() + "'");
            }
            staged.emplace_back(tmp, dir / name);
        }
        for (const auto& [tmp, final_path] : staged) fs::rename(tmp, final_path);
    }

private:
    std::map<std::string, std::string> files_;
};

// ---------------------------------------------------------------------------
// Log-log line plot
// ---------------------------------------------------------------------------

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
};

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Minimal log-log plot: frame, decade ticks, one polyline per series.
/// Points with nonpositive coordinates cannot be placed and are skipped.
inline std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series) {
    constexpr double W = 640, H = 440, L = 80, R = 20, T = 40, B = 60;
    double xlo = HUGE_VAL, xhi = -HUGE_VAL, ylo = HUGE_VAL, yhi = -HUGE_VAL;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
            xlo = std::min(xlo, std::log10(s.x[i]));
            xhi = std::max(xhi, std::log10(s.x[i]));
            ylo = std::min(ylo, std::log10(s.y[i]));
            yhi = std::max(yhi, std::log10(s.y[i]));
        }
    const bool empty = !(xlo <= xhi);
    if (empty) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    xlo = std::floor(xlo), xhi = std::max(std::ceil(xhi), xlo + 1);
    ylo = std::floor(ylo), yhi = std::max(std::ceil(yhi), ylo + 1);
    auto px = [&](double lx) { return L + (lx - xlo) / (xhi - xlo) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - ylo) / (yhi - ylo) * (H - T - B); };

    std::ostringstream os;
    char buf[160];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
       << W << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
       << svg_escape(title) << "</text>\n";
    std::snprintf(buf, sizeof(buf), "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                  L, T, W - L - R, H - T - B);
    os << buf;
    for (int d = static_cast<int>(xlo); d <= static_cast<int>(xhi); ++d) {
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.2f\" y1=\"%g\" x2=\"%.2f\" y2=\"%g\" stroke=\"#ccc\"/>"
                      "<text x=\"%.2f\" y=\"%g\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e%d</text>\n",
                      px(d), T, px(d), H - B, px(d), H - B + 16, d);
        os << buf;
    }
    for (int d = static_cast<int>(ylo); d <= static_cast<int>(yhi); ++d) {
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"#ccc\"/>"
                      "<text x=\"%g\" y=\"%.2f\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e%d</text>\n",
                      L, py(d), W - R, py(d), L - 6, py(d) + 4, d);
        os << buf;
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << svg_escape(xlabel) << "</text>\n";
    os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"13\" transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">" << svg_escape(ylabel)
       << "</text>\n";

    double legend_y = T + 16;
    for (const auto& s : series) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(std::log10(s.x[i])), py(std::log10(s.y[i])));
            pts += buf;
        }
        if (!pts.empty()) {
            pts.pop_back();
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"" << pts
               << "\"/>\n";
        }
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%g\" y=\"%g\" font-family=\"sans-serif\" font-size=\"12\" fill=\"%s\">",
                      W - R - 150, legend_y, s.color.c_str());
        os << buf << svg_escape(s.label) << "</text>\n";
        legend_y += 16;
    }
    if (empty)
        os << "<text x=\"" << W / 2 << "\" y=\"" << H / 2
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">no positive values to plot</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace sublin::cli
