#pragma once

#include <string>
#include <vector>

namespace plateau {

struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color; // empty picks from the palette
    bool dashed = false;
};

struct PlotSpec {
    std::string title, xlabel = "t", ylabel = "R";
    bool logx = true, logy = false;
    std::vector<Series> series;
    bool legend = true;
};

// Self-contained static SVG, no scripting.
std::string render_svg(const PlotSpec &p, double width = 640, double height = 400);
// Panels laid out row-major in `cols` columns.
std::string render_panels(const std::vector<PlotSpec> &panels, int cols, double panel_w = 480,
                          double panel_h = 320);

void write_text(const std::string &path, const std::string &text);

} // namespace plateau
