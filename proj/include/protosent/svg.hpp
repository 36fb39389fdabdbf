#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "protosent/errors.hpp"

namespace protosent {

// Minimal SVG emitter, enough for the box plots the trace tool draws.
class SvgCanvas {
public:
    SvgCanvas(double width, double height) : width_(width), height_(height) {
        body_.precision(3);
        body_ << std::fixed;
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "none") {
        body_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
              << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0) {
        body_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
              << "\" stroke=\"" << stroke << "\" stroke-width=\"" << stroke_width << "\"/>\n";
    }

    void text(double x, double y, const std::string& content, int font_size = 12,
              const std::string& anchor = "middle") {
        body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << font_size
              << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << content
              << "</text>\n";
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write svg: " + path);
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
           << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body_.str() << "</svg>\n";
    }

private:
    double width_, height_;
    std::ostringstream body_;
};

struct BoxStats {
    double lo = 0, q1 = 0, median = 0, q3 = 0, hi = 0;
    bool empty = true;
};

inline BoxStats box_stats(std::vector<double> values) {
    BoxStats s;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < values.size() ? values[i] * (1 - frac) + values[i + 1] * frac : values[i];
    };
    s.lo = values.front();
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.hi = values.back();
    s.empty = false;
    return s;
}

}  // namespace protosent
