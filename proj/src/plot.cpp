#include "bubblelab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace bubblelab {

namespace {

struct Frame {
    double x0, y0, w, h;  // pixel box
    double xmin, xmax, ymin, ymax;

    double x(double v) const { return x0 + (xmax == xmin ? 0.5 : (v - xmin) / (xmax - xmin)) * w; }
    double y(double v) const { return y0 + h - (ymax == ymin ? 0.5 : (v - ymin) / (ymax - ymin)) * h; }
};

std::string num(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << v;
    return os.str();
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

void axes(std::ostringstream& svg, const Frame& f, const std::string& ylabel, int yticks) {
    svg << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.w) << "\" height=\""
        << num(f.h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= yticks; ++i) {
        double v = f.ymin + (f.ymax - f.ymin) * i / yticks;
        svg << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(f.y(v) + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    svg << "<text x=\"" << num(f.x0 - 44) << "\" y=\"" << num(f.y0 + f.h / 2) << "\" font-size=\"12\" transform=\"rotate(-90 "
        << num(f.x0 - 44) << " " << num(f.y0 + f.h / 2) << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
}

}  // namespace

std::string render_price_svg(std::span<const PricePathPoint> path, const PlotOptions& options) {
    if (path.empty()) throw std::invalid_argument("render_price_svg: empty price path");
    const double W = options.width, H = options.height;
    const double left = 70, right = 20, top = 40, gap = 30, bottom = 40;
    const double price_h = (H - top - gap - bottom) * 0.68;
    const double vol_h = (H - top - gap - bottom) - price_h;

    double lo = options.fundamental, hi = options.fundamental, vmax = 0.0;
    for (const auto& p : path) {
        lo = std::min(lo, p.ci_lo);
        hi = std::max(hi, p.ci_hi);
        vmax = std::max(vmax, p.mean_volume);
    }
    lo = std::floor(lo - 1.0);
    hi = std::ceil(hi + 1.0);
    if (vmax <= 0.0) vmax = 1.0;
    const double xmin = path.front().period - 0.5, xmax = path.back().period + 0.5;

    Frame price{left, top, W - left - right, price_h, xmin, xmax, lo, hi};
    Frame vol{left, top + price_h + gap, W - left - right, vol_h, xmin, xmax, 0.0, vmax * 1.1};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << options.height
        << "\" font-family=\"sans-serif\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(W / 2) << "\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">"
        << escape_xml(options.title) << "</text>\n";

    axes(svg, price, "price", 4);
    // Confidence band.
    svg << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (const auto& p : path) svg << num(price.x(p.period)) << "," << num(price.y(p.ci_hi)) << " ";
    for (auto it = path.rbegin(); it != path.rend(); ++it)
        svg << num(price.x(it->period)) << "," << num(price.y(it->ci_lo)) << " ";
    svg << "\"/>\n";
    // Fundamental value.
    svg << "<line x1=\"" << num(price.x0) << "\" x2=\"" << num(price.x0 + price.w) << "\" y1=\""
        << num(price.y(options.fundamental)) << "\" y2=\"" << num(price.y(options.fundamental))
        << "\" stroke=\"#d62728\" stroke-dasharray=\"6,4\"/>\n";
    svg << "<text x=\"" << num(price.x0 + price.w - 4) << "\" y=\"" << num(price.y(options.fundamental) - 5)
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#d62728\">FV " << num(options.fundamental) << "</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    for (const auto& p : path) svg << num(price.x(p.period)) << "," << num(price.y(p.mean_price)) << " ";
    svg << "\"/>\n";

    axes(svg, vol, "volume", 2);
    const double bar = std::max(2.0, vol.w / (xmax - xmin) * 0.6);
    for (const auto& p : path) {
        double top_y = vol.y(p.mean_volume);
        svg << "<rect x=\"" << num(vol.x(p.period) - bar / 2) << "\" y=\"" << num(top_y) << "\" width=\"" << num(bar)
            << "\" height=\"" << num(vol.y0 + vol.h - top_y) << "\" fill=\"#737373\"/>\n";
        svg << "<text x=\"" << num(vol.x(p.period)) << "\" y=\"" << num(vol.y0 + vol.h + 15)
            << "\" font-size=\"11\" text-anchor=\"middle\">" << p.period << "</text>\n";
    }
    svg << "<text x=\"" << num(left + (W - left - right) / 2) << "\" y=\"" << num(H - 6)
        << "\" font-size=\"12\" text-anchor=\"middle\">round</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_price_path_csv(const std::filesystem::path& path, std::span<const PricePathPoint> points) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "round,mean_price,ci_lo,ci_hi,mean_volume\n" << std::setprecision(10);
    for (const auto& p : points)
        out << p.period << "," << p.mean_price << "," << p.ci_lo << "," << p.ci_hi << "," << p.mean_volume << "\n";
}

void write_price_svg(const std::filesystem::path& path, std::span<const PricePathPoint> points,
                     const PlotOptions& options) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << render_price_svg(points, options);
}

}  // namespace bubblelab
