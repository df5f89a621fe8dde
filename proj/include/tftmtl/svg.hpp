#pragma once
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tftmtl/errors.hpp"
#include "tftmtl/textio.hpp"
#include "tftmtl/train.hpp"

namespace tftmtl {

/// Pure-text SVG of the train/validation total-loss trajectories: exactly two
/// polylines, labeled axes, and a legend. No raster dependencies.
inline std::string render_loss_curves(const std::vector<EpochLog>& logs) {
    if (logs.empty()) throw ValidationError("plot: epoch log is empty");

    const double width = 860, height = 520;
    const double left = 70, right = 30, top = 40, bottom = 60;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double lo = logs[0].train_total, hi = logs[0].train_total;
    for (const EpochLog& e : logs) {
        lo = std::min({lo, e.train_total, e.val_total});
        hi = std::max({hi, e.train_total, e.val_total});
    }
    if (hi == lo) hi = lo + 1.0;
    const int emin = logs.front().epoch, emax = logs.back().epoch;
    const double espan = emax > emin ? static_cast<double>(emax - emin) : 1.0;

    auto sx = [&](int epoch) { return left + plot_w * (epoch - emin) / espan; };
    auto sy = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    auto polyline = [&](const char* color, auto value_of) {
        std::string pts;
        for (const EpochLog& e : logs) {
            pts += fmt_double(sx(e.epoch)) + "," + fmt_double(sy(value_of(e))) + " ";
        }
        return "  <polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts +
               "\"/>\n";
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_double(width) + "\" height=\"" +
           fmt_double(height) + "\" viewBox=\"0 0 " + fmt_double(width) + " " + fmt_double(height) + "\">\n";
    svg += "  <rect x=\"0\" y=\"0\" width=\"" + fmt_double(width) + "\" height=\"" + fmt_double(height) +
           "\" fill=\"white\"/>\n";
    // axes
    svg += "  <line x1=\"" + fmt_double(left) + "\" y1=\"" + fmt_double(top) + "\" x2=\"" + fmt_double(left) +
           "\" y2=\"" + fmt_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + fmt_double(left) + "\" y1=\"" + fmt_double(top + plot_h) + "\" x2=\"" +
           fmt_double(left + plot_w) + "\" y2=\"" + fmt_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    // tick labels at the extremes
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", hi);
    svg += "  <text x=\"" + fmt_double(left - 8) + "\" y=\"" + fmt_double(top + 4) +
           "\" text-anchor=\"end\" font-size=\"12\">" + buf + "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", lo);
    svg += "  <text x=\"" + fmt_double(left - 8) + "\" y=\"" + fmt_double(top + plot_h + 4) +
           "\" text-anchor=\"end\" font-size=\"12\">" + buf + "</text>\n";
    svg += "  <text x=\"" + fmt_double(left) + "\" y=\"" + fmt_double(height - 24) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + std::to_string(emin) + "</text>\n";
    svg += "  <text x=\"" + fmt_double(left + plot_w) + "\" y=\"" + fmt_double(height - 24) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + std::to_string(emax) + "</text>\n";
    // axis labels
    svg += "  <text x=\"" + fmt_double(left + plot_w / 2) + "\" y=\"" + fmt_double(height - 8) +
           "\" text-anchor=\"middle\" font-size=\"14\">epoch</text>\n";
    svg += "  <text x=\"18\" y=\"" + fmt_double(top + plot_h / 2) + "\" text-anchor=\"middle\" font-size=\"14\" " +
           "transform=\"rotate(-90 18 " + fmt_double(top + plot_h / 2) + ")\">total loss</text>\n";
    // curves
    svg += polyline("#1f6fb2", [](const EpochLog& e) { return e.train_total; });
    svg += polyline("#d1495b", [](const EpochLog& e) { return e.val_total; });
    // legend
    const double lx = left + plot_w - 150, ly = top + 10;
    svg += "  <line x1=\"" + fmt_double(lx) + "\" y1=\"" + fmt_double(ly) + "\" x2=\"" + fmt_double(lx + 24) +
           "\" y2=\"" + fmt_double(ly) + "\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>\n";
    svg += "  <text x=\"" + fmt_double(lx + 30) + "\" y=\"" + fmt_double(ly + 4) +
           "\" font-size=\"12\">training</text>\n";
    svg += "  <line x1=\"" + fmt_double(lx) + "\" y1=\"" + fmt_double(ly + 18) + "\" x2=\"" + fmt_double(lx + 24) +
           "\" y2=\"" + fmt_double(ly + 18) + "\" stroke=\"#d1495b\" stroke-width=\"2\"/>\n";
    svg += "  <text x=\"" + fmt_double(lx + 30) + "\" y=\"" + fmt_double(ly + 22) +
           "\" font-size=\"12\">validation</text>\n";
    svg += "</svg>\n";
    return svg;
}

}  // namespace tftmtl
