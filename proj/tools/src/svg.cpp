#include "mobgen_cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mobgen/error.hpp"

namespace mobgen::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
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

void header(std::ostringstream& os, double w, double h, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
       << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
}

}  // namespace

std::string svg_line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw InvalidArgument("svg_line_chart: x and y lengths differ");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    header(os, kWidth, kHeight, title);
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0;
        const double fy = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
           << tick(fx) << "</text>\n";
        os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(fy) + 4) << "\" text-anchor=\"end\">" << tick(fy)
           << "</text>\n";
    }
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << num(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* colour = kPalette[k % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) {
            if (!std::isfinite(series[k].x[i]) || !std::isfinite(series[k].y[i])) continue;
            os << num(px(series[k].x[i])) << ',' << num(py(series[k].y[i])) << ' ';
        }
        os << "\"/>\n";
        const double ly = kTop + 14 + 18.0 * static_cast<double>(k);
        os << "<line x1=\"" << num(kLeft + pw + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(kLeft + pw + 30)
           << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(kLeft + pw + 34) << "\" y=\"" << num(ly) << "\">" << escape(series[k].label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string svg_ecdf(const std::vector<std::pair<std::string, std::vector<double>>>& samples, const std::string& title,
                     const std::string& x_label) {
    std::vector<Series> series;
    for (const auto& [label, values] : samples) {
        std::vector<double> v = values;
        std::sort(v.begin(), v.end());
        Series s{label, {}, {}};
        const double n = static_cast<double>(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            s.x.push_back(v[i]);
            s.y.push_back(static_cast<double>(i) / n);
            s.x.push_back(v[i]);
            s.y.push_back(static_cast<double>(i + 1) / n);
        }
        series.push_back(std::move(s));
    }
    return svg_line_chart(series, title, x_label, "cumulative fraction");
}

std::string svg_flow_heatmap(const FlowMatrix& flows, const std::string& title) {
    const std::size_t n = flows.size();
    if (n == 0) throw InvalidArgument("svg_flow_heatmap: empty flow matrix");
    const double side = 480.0;
    const double cell = side / static_cast<double>(n);
    double vmax = 0.0;
    for (double v : flows.data()) vmax = std::max(vmax, v);
    const double lmax = std::log1p(vmax);

    std::ostringstream os;
    header(os, side + 80, side + 80, title);
    os << "<g transform=\"translate(40,40)\">\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = flows(i, j);
            if (v <= 0.0) continue;
            const double t = lmax > 0 ? std::log1p(v) / lmax : 0.0;
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
            os << "<rect x=\"" << num(cell * static_cast<double>(j)) << "\" y=\"" << num(cell * static_cast<double>(i))
               << "\" width=\"" << num(cell) << "\" height=\"" << num(cell) << "\" fill=\"rgb(255," << shade << ','
               << shade << ")\"/>\n";
        }
    }
    os << "<rect width=\"" << num(side) << "\" height=\"" << num(side) << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "</g>\n";
    os << "<text x=\"" << num(40 + side / 2) << "\" y=\"" << num(side + 65) << "\" text-anchor=\"middle\">destination</text>\n";
    os << "<text transform=\"translate(24," << num(40 + side / 2) << ") rotate(-90)\" text-anchor=\"middle\">origin</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace mobgen::cli
