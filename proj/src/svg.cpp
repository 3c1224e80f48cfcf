#include "ctnorm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctnorm/error.hpp"

namespace ctnorm::radiomics {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

} // namespace

void write_boxplot_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<std::pair<std::string, BoxStats>>& boxes)
{
    const double width = 120.0 * double(std::max<size_t>(boxes.size(), 1)) + 80.0;
    const double height = 360.0;
    const double plot_top = 50.0, plot_bottom = height - 50.0;

    double vmax = 0.0;
    for (const auto& [label, bs] : boxes)
        vmax = std::max(vmax, bs.max);
    if (vmax <= 0.0)
        vmax = 1.0;

    auto ypos = [&](double v) {
        return plot_bottom - (v / vmax) * (plot_bottom - plot_top);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
       << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
    os << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"16\">"
       << title << "</text>\n";
    os << "<line x1=\"50\" y1=\"" << num(plot_top) << "\" x2=\"50\" y2=\"" << num(plot_bottom)
       << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = vmax * t / 4.0;
        os << "<line x1=\"46\" y1=\"" << num(ypos(v)) << "\" x2=\"50\" y2=\"" << num(ypos(v))
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"42\" y=\"" << num(ypos(v) + 4) << "\" text-anchor=\"end\" "
              "font-family=\"sans-serif\" font-size=\"11\">"
           << num(v) << "</text>\n";
    }

    double cx = 110.0;
    for (const auto& [label, bs] : boxes) {
        const double half = 35.0;
        os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(ypos(bs.min)) << "\" x2=\"" << num(cx)
           << "\" y2=\"" << num(ypos(bs.max)) << "\" stroke=\"black\"/>\n";
        for (double v : {bs.min, bs.max})
            os << "<line x1=\"" << num(cx - half / 2) << "\" y1=\"" << num(ypos(v)) << "\" x2=\""
               << num(cx + half / 2) << "\" y2=\"" << num(ypos(v)) << "\" stroke=\"black\"/>\n";
        os << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(ypos(bs.q3)) << "\" width=\""
           << num(2 * half) << "\" height=\"" << num(std::max(ypos(bs.q1) - ypos(bs.q3), 0.5))
           << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(ypos(bs.median)) << "\" x2=\""
           << num(cx + half) << "\" y2=\"" << num(ypos(bs.median))
           << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(cx) << "\" y=\"" << num(plot_bottom + 20)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << label
           << " (n=" << bs.n << ")</text>\n";
        cx += 120.0;
    }
    os << "</svg>\n";

    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << os.str();
}

} // namespace ctnorm::radiomics
