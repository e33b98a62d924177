#pragma once

#include <string>
#include <vector>

#include "acmca/io.hpp"

namespace acmca {

struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, y)
};

// Minimal deterministic line plot; enough for ROC overlays and sweep curves.
inline std::string line_plot_svg(const std::string& title, const std::string& xlabel,
                                 const std::string& ylabel,
                                 const std::vector<SvgSeries>& series, double xmin, double xmax,
                                 double ymin, double ymax, bool diagonal = false) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const double W = 640, H = 480, L = 70, R = 30, T = 40, B = 55;
    const double pw = W - L - R, ph = H - T - B;
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * ph; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
    s += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + title + "</text>\n";
    // axes
    s += "<line x1=\"" + fmt_fixed(L, 1) + "\" y1=\"" + fmt_fixed(H - B, 1) + "\" x2=\"" +
         fmt_fixed(W - R, 1) + "\" y2=\"" + fmt_fixed(H - B, 1) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    s += "<line x1=\"" + fmt_fixed(L, 1) + "\" y1=\"" + fmt_fixed(T, 1) + "\" x2=\"" +
         fmt_fixed(L, 1) + "\" y2=\"" + fmt_fixed(H - B, 1) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fy = ymin + (ymax - ymin) * i / 4.0;
        s += "<text x=\"" + fmt_fixed(px(fx), 1) + "\" y=\"" + fmt_fixed(H - B + 18, 1) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
             fmt_double(fx) + "</text>\n";
        s += "<text x=\"" + fmt_fixed(L - 8, 1) + "\" y=\"" + fmt_fixed(py(fy) + 4, 1) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
             fmt_double(fy) + "</text>\n";
    }
    s += "<text x=\"" + fmt_fixed(L + pw / 2, 1) + "\" y=\"" + fmt_fixed(H - 14, 1) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xlabel +
         "</text>\n";
    s += "<text x=\"18\" y=\"" + fmt_fixed(T + ph / 2, 1) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 " + fmt_fixed(T + ph / 2, 1) + ")\">" + ylabel +
         "</text>\n";
    if (diagonal)
        s += "<line x1=\"" + fmt_fixed(px(xmin), 1) + "\" y1=\"" + fmt_fixed(py(ymin), 1) +
             "\" x2=\"" + fmt_fixed(px(xmax), 1) + "\" y2=\"" + fmt_fixed(py(ymax), 1) +
             "\" stroke=\"#aaaaaa\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kColors[k % 10];
        std::string pts;
        for (auto [x, y] : series[k].points)
            pts += fmt_fixed(px(x), 2) + "," + fmt_fixed(py(y), 2) + " ";
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.6\" points=\"" + pts + "\"/>\n";
        const double ly = T + 16 + 16 * static_cast<double>(k);
        s += "<line x1=\"" + fmt_fixed(W - R - 150, 1) + "\" y1=\"" + fmt_fixed(ly - 4, 1) +
             "\" x2=\"" + fmt_fixed(W - R - 128, 1) + "\" y2=\"" + fmt_fixed(ly - 4, 1) +
             "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + fmt_fixed(W - R - 122, 1) + "\" y=\"" + fmt_fixed(ly, 1) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" + series[k].label + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace acmca
