#include "plateau/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace plateau {

namespace {

const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string esc(const std::string &s) {
    std::string o;
    for (char c : s) {
        if (c == '<')
            o += "&lt;";
        else if (c == '>')
            o += "&gt;";
        else if (c == '&')
            o += "&amp;";
        else
            o += c;
    }
    return o;
}

std::string num(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", x);
    return b;
}

std::string tick_label(double v, bool log) {
    char b[32];
    if (log)
        std::snprintf(b, sizeof b, "1e%d", int(std::lround(v)));
    else
        std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

std::vector<double> lin_ticks(double lo, double hi) {
    double span = hi - lo;
    if (!(span > 0))
        return {lo};
    double step = std::pow(10.0, std::floor(std::log10(span / 5)));
    for (double f : {1.0, 2.0, 5.0, 10.0})
        if (span / (step * f) <= 6) {
            step *= f;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step)
        t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

// body of one panel translated by (ox, oy)
void panel(std::ostringstream &os, const PlotSpec &p, double ox, double oy, double W, double H) {
    const double ml = 64, mr = 16, mt = 28, mb = 44;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto tx = [&](double x) { return p.logx ? std::log10(x) : x; };
    auto ty = [&](double y) { return p.logy ? std::log10(y) : y; };
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (auto &s : p.series)
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if ((p.logx && !(s.x[k] > 0)) || (p.logy && !(s.y[k] > 0)) || !std::isfinite(s.y[k]))
                continue;
            x0 = std::min(x0, tx(s.x[k]));
            x1 = std::max(x1, tx(s.x[k]));
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    if (x0 > x1) {
        x0 = 0;
        x1 = 1;
        y0 = 0;
        y1 = 1;
    }
    if (x1 == x0)
        x1 = x0 + 1;
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    double pad = 0.04 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto X = [&](double x) { return ox + ml + (x - x0) / (x1 - x0) * pw; };
    auto Y = [&](double y) { return oy + mt + (1 - (y - y0) / (y1 - y0)) * ph; };

    os << "<rect x=\"" << num(ox + ml) << "\" y=\"" << num(oy + mt) << "\" width=\"" << num(pw) << "\" height=\""
       << num(ph) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    std::vector<double> xt, yt;
    if (p.logx)
        for (double v = std::ceil(x0); v <= x1; v += 1)
            xt.push_back(v);
    else
        xt = lin_ticks(x0, x1);
    if (p.logy)
        for (double v = std::ceil(y0); v <= y1; v += 1)
            yt.push_back(v);
    else
        yt = lin_ticks(y0, y1);
    for (double v : xt) {
        os << "<line x1=\"" << num(X(v)) << "\" y1=\"" << num(oy + mt + ph) << "\" x2=\"" << num(X(v)) << "\" y2=\""
           << num(oy + mt + ph + 5) << "\" stroke=\"#333\"/>";
        os << "<text x=\"" << num(X(v)) << "\" y=\"" << num(oy + mt + ph + 18)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(v, p.logx) << "</text>\n";
    }
    for (double v : yt) {
        os << "<line x1=\"" << num(ox + ml - 5) << "\" y1=\"" << num(Y(v)) << "\" x2=\"" << num(ox + ml) << "\" y2=\""
           << num(Y(v)) << "\" stroke=\"#333\"/>";
        os << "<text x=\"" << num(ox + ml - 8) << "\" y=\"" << num(Y(v) + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << tick_label(v, p.logy) << "</text>\n";
    }
    os << "<text x=\"" << num(ox + ml + pw / 2) << "\" y=\"" << num(oy + H - 8)
       << "\" font-size=\"13\" text-anchor=\"middle\">" << esc(p.xlabel) << "</text>\n";
    os << "<text transform=\"translate(" << num(ox + 16) << "," << num(oy + mt + ph / 2)
       << ") rotate(-90)\" font-size=\"13\" text-anchor=\"middle\">" << esc(p.ylabel) << "</text>\n";
    if (!p.title.empty())
        os << "<text x=\"" << num(ox + ml + pw / 2) << "\" y=\"" << num(oy + 18)
           << "\" font-size=\"14\" text-anchor=\"middle\">" << esc(p.title) << "</text>\n";

    int ci = 0;
    for (auto &s : p.series) {
        std::string col = s.color.empty() ? kPalette[ci % 10] : s.color;
        ++ci;
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"";
        if (s.dashed)
            os << " stroke-dasharray=\"6,4\"";
        os << " points=\"";
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if ((p.logx && !(s.x[k] > 0)) || (p.logy && !(s.y[k] > 0)) || !std::isfinite(s.y[k]))
                continue;
            os << num(X(tx(s.x[k]))) << ',' << num(Y(ty(s.y[k]))) << ' ';
        }
        os << "\"/>\n";
    }
    if (p.legend && p.series.size() > 1 && p.series.size() <= 12) {
        double ly = oy + mt + 14;
        ci = 0;
        for (auto &s : p.series) {
            std::string col = s.color.empty() ? kPalette[ci % 10] : s.color;
            ++ci;
            if (s.label.empty())
                continue;
            double lx = ox + ml + pw - 150;
            os << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(lx + 20) << "\" y2=\""
               << num(ly - 4) << "\" stroke=\"" << col << "\" stroke-width=\"1.5\""
               << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>";
            os << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly) << "\" font-size=\"11\">" << esc(s.label)
               << "</text>\n";
            ly += 15;
        }
    }
}

} // namespace

std::string render_svg(const PlotSpec &p, double width, double height) { return render_panels({p}, 1, width, height); }

std::string render_panels(const std::vector<PlotSpec> &panels, int cols, double W, double H) {
    if (cols < 1)
        throw std::invalid_argument("render_panels: cols must be positive");
    int rows = int((panels.size() + cols - 1) / cols);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(cols * W) << "\" height=\"" << num(rows * H)
       << "\" viewBox=\"0 0 " << num(cols * W) << ' ' << num(rows * H) << "\" font-family=\"sans-serif\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i)
        panel(os, panels[i], double(i % cols) * W, double(i / cols) * H, W, H);
    os << "</svg>\n";
    return os.str();
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    os << text;
}

} // namespace plateau
