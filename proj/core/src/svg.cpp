#include "geoscore/svg.hpp"

#include "geoscore/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace geoscore {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 36.0;
constexpr double kMarginBottom = 52.0;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void update(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // Degenerate spans (single point) are widened so scaling stays finite.
    void finalize() {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            const double pad = std::max(1.0, std::abs(hi)) * 0.5;
            lo -= pad;
            hi += pad;
        } else {
            const double pad = (hi - lo) * 0.05;
            lo -= pad;
            hi += pad;
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

class Canvas {
public:
    Canvas(const std::vector<SvgSeries>& series, const SvgAxes& axes) {
        bool any = false;
        for (const auto& s : series) {
            for (Index i = 0; i < s.points.rows(); ++i) {
                x_.update(s.points(i, 0));
                y_.update(s.points(i, 1));
                any = true;
            }
        }
        if (!any) throw DomainError("svg plot needs at least one data point");
        x_.finalize();
        y_.finalize();
        axes_ = axes;
    }

    double px(double v) const {
        return kMarginLeft + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - kMarginLeft - kMarginRight);
    }
    double py(double v) const {
        return kHeight - kMarginBottom -
               (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - kMarginTop - kMarginBottom);
    }

    void header(std::ofstream& out) const {
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
            << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
            << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        // axes
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
            << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom
            << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
        // ticks
        for (int k = 0; k <= 4; ++k) {
            const double xv = x_.lo + (x_.hi - x_.lo) * k / 4;
            const double yv = y_.lo + (y_.hi - y_.lo) * k / 4;
            out << "<text x=\"" << px(xv) << "\" y=\"" << kHeight - kMarginBottom + 18
                << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
            out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(yv) + 4
                << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
        }
        out << "<text x=\"" << (kWidth / 2) << "\" y=\"" << kHeight - 14
            << "\" font-size=\"13\" text-anchor=\"middle\">" << axes_.x_label << "</text>\n";
        out << "<text x=\"16\" y=\"" << (kHeight / 2)
            << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
            << (kHeight / 2) << ")\">" << axes_.y_label << "</text>\n";
        out << "<text x=\"" << (kWidth / 2) << "\" y=\"22\" font-size=\"15\" "
            << "text-anchor=\"middle\">" << axes_.title << "</text>\n";
    }

    void legend(std::ofstream& out, const std::vector<SvgSeries>& series) const {
        double y = kMarginTop + 6;
        for (const auto& s : series) {
            out << "<rect x=\"" << kWidth - kMarginRight - 150 << "\" y=\"" << y - 9
                << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
            out << "<text x=\"" << kWidth - kMarginRight - 134 << "\" y=\"" << y
                << "\" font-size=\"12\">" << s.label << "</text>\n";
            y += 18;
        }
    }

private:
    Range x_, y_;
    SvgAxes axes_;
};

} // namespace

void emit_svg_scatter(const std::vector<SvgSeries>& series, const SvgAxes& axes,
                      const std::string& path) {
    const Canvas canvas(series, axes);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    canvas.header(out);
    for (const auto& s : series) {
        for (Index i = 0; i < s.points.rows(); ++i) {
            const double cx = canvas.px(s.points(i, 0));
            const double cy = canvas.py(s.points(i, 1));
            if (s.marker == "triangle") {
                out << "<polygon points=\"" << cx << "," << cy - 4.5 << " " << cx - 4.0 << ","
                    << cy + 3.5 << " " << cx + 4.0 << "," << cy + 3.5 << "\" fill=\"" << s.color
                    << "\"/>\n";
            } else {
                out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"3\" fill=\"" << s.color
                    << "\"/>\n";
            }
        }
    }
    canvas.legend(out, series);
    out << "</svg>\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

void emit_svg_lines(const std::vector<SvgSeries>& series, const SvgAxes& axes,
                    const std::string& path) {
    const Canvas canvas(series, axes);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    canvas.header(out);
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\" points=\"";
        for (Index i = 0; i < s.points.rows(); ++i) {
            out << canvas.px(s.points(i, 0)) << "," << canvas.py(s.points(i, 1));
            if (i + 1 < s.points.rows()) out << " ";
        }
        out << "\"/>\n";
        for (Index i = 0; i < s.points.rows(); ++i) {
            out << "<circle cx=\"" << canvas.px(s.points(i, 0)) << "\" cy=\""
                << canvas.py(s.points(i, 1)) << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
        }
    }
    canvas.legend(out, series);
    out << "</svg>\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

} // namespace geoscore
