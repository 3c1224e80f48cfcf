#include "ctnorm/projector.hpp"

#include <cmath>
#include <complex>
#include <cstdint>

#include "ctnorm/error.hpp"
#include "fft.hpp"

namespace ctnorm {

Window window_from_name(const std::string& name)
{
    if (name == "ramp")
        return Window::Ramp;
    if (name == "hann")
        return Window::Hann;
    if (name == "shepp-logan")
        return Window::SheppLogan;
    throw ConfigError("unknown reconstruction window: " + name);
}

const char* window_name(Window w)
{
    switch (w) {
    case Window::Ramp: return "ramp";
    case Window::Hann: return "hann";
    default: return "shepp-logan";
    }
}

float hu_to_mu(float hu)
{
    float mu = kMuWater * (1.0f + hu / 1000.0f);
    return mu < 0.0f ? 0.0f : mu;
}

float mu_to_hu(float mu)
{
    return 1000.0f * (mu / kMuWater - 1.0f);
}

int default_detector_count(int image_side)
{
    return int(std::ceil(std::sqrt(2.0) * image_side)) + 1;
}

namespace {

inline double bilinear(const Image2D& im, double x, double y)
{
    // x, y in pixel coordinates; outside the grid reads as 0
    if (x < -1.0 || x > double(im.w) || y < -1.0 || y > double(im.h))
        return 0.0;
    const int x0 = int(std::floor(x));
    const int y0 = int(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto sample = [&](int yy, int xx) -> double {
        if (xx < 0 || xx >= im.w || yy < 0 || yy >= im.h)
            return 0.0;
        return im.at(yy, xx);
    };
    return (1.0 - fy) * ((1.0 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
           fy * ((1.0 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
}

void check_square(const Image2D& im)
{
    if (im.h != im.w || im.h < 1)
        throw ShapeError("forward projection requires a square image");
}

double project_ray(const Image2D& mu, double pixel_mm, double cos_t, double sin_t, double s_mm)
{
    const int n = mu.w;
    const double half = 0.5 * (n - 1);
    const double diag = double(n) * pixel_mm * std::sqrt(2.0);
    const double step = 0.5 * pixel_mm;
    const int nsteps = int(std::ceil(diag / step));
    double acc = 0.0;
    for (int i = 0; i < nsteps; ++i) {
        const double t = -0.5 * diag + (i + 0.5) * step;
        const double x_mm = s_mm * cos_t - t * sin_t;
        const double y_mm = s_mm * sin_t + t * cos_t;
        acc += bilinear(mu, x_mm / pixel_mm + half, y_mm / pixel_mm + half);
    }
    return acc * step;
}

} // namespace

Image2D forward_project(const Image2D& mu, float pixel_mm, int n_angles,
                        float det_spacing, int n_detectors)
{
    check_square(mu);
    if (n_angles < 1)
        throw ShapeError("n_angles must be positive");
    const int nd = n_detectors > 0 ? n_detectors : default_detector_count(mu.w);
    Image2D sino(n_angles, nd);
    const double det_half = 0.5 * (nd - 1);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n_angles; ++a) {
        const double theta = M_PI * double(a) / double(n_angles);
        const double c = std::cos(theta), s = std::sin(theta);
        for (int d = 0; d < nd; ++d) {
            const double s_mm = (double(d) - det_half) * det_spacing;
            sino.at(a, d) = float(project_ray(mu, pixel_mm, c, s, s_mm));
        }
    }
    return sino;
}

Image2D backproject(const Image2D& sino_slice, int out_side, float pixel_mm, float det_spacing)
{
    const int n_angles = sino_slice.h;
    const int nd = sino_slice.w;
    if (n_angles < 1 || nd < 1 || out_side < 1)
        throw ShapeError("backproject: empty sinogram or output");
    Image2D out(out_side, out_side);
    const double half = 0.5 * (out_side - 1);
    const double det_half = 0.5 * (nd - 1);
    const double scale = M_PI / double(n_angles);

    std::vector<double> cos_t, sin_t;
    cos_t.resize(size_t(n_angles));
    sin_t.resize(size_t(n_angles));
    for (int a = 0; a < n_angles; ++a) {
        cos_t[size_t(a)] = std::cos(M_PI * double(a) / double(n_angles));
        sin_t[size_t(a)] = std::sin(M_PI * double(a) / double(n_angles));
    }

#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < out_side; ++iy) {
        const double y_mm = (double(iy) - half) * pixel_mm;
        for (int ix = 0; ix < out_side; ++ix) {
            const double x_mm = (double(ix) - half) * pixel_mm;
            double acc = 0.0;
            for (int a = 0; a < n_angles; ++a) {
                const double s_mm = x_mm * cos_t[size_t(a)] + y_mm * sin_t[size_t(a)];
                const double pos = s_mm / det_spacing + det_half;
                if (pos < 0.0 || pos > double(nd - 1))
                    continue;
                const int d0 = int(pos) < nd - 1 ? int(pos) : nd - 2;
                const double f = pos - d0;
                acc += (1.0 - f) * sino_slice.at(a, d0) + f * sino_slice.at(a, d0 + 1);
            }
            out.at(iy, ix) = float(acc * scale);
        }
    }
    return out;
}

Image2D fbp_reconstruct(const Image2D& sino_slice, Window window, int out_side,
                        float pixel_mm, float det_spacing)
{
    const int n_angles = sino_slice.h;
    const int nd = sino_slice.w;
    if (n_angles < 1 || nd < 1)
        throw ShapeError("fbp: empty sinogram slice");

    const size_t m = detail::next_pow2(size_t(2) * nd);
    const double dnu = 1.0 / (double(m) * det_spacing); // cycles/mm per bin

    std::vector<double> filter(m / 2 + 1);
    for (size_t k = 0; k <= m / 2; ++k) {
        const double f = double(k) / double(m / 2); // 0..1 of Nyquist
        double win = 1.0;
        switch (window) {
        case Window::Ramp: win = 1.0; break;
        case Window::Hann: win = 0.5 * (1.0 + std::cos(M_PI * f)); break;
        case Window::SheppLogan:
            win = f > 0.0 ? std::sin(0.5 * M_PI * f) / (0.5 * M_PI * f) : 1.0;
            break;
        }
        filter[k] = double(k) * dnu * win;
    }

    Image2D filtered(n_angles, nd);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n_angles; ++a) {
        std::vector<std::complex<double>> row(m, 0.0);
        for (int d = 0; d < nd; ++d)
            row[size_t(d)] = sino_slice.at(a, d);
        detail::fft(row, false);
        row[0] *= filter[0];
        for (size_t k = 1; k < m / 2; ++k) {
            row[k] *= filter[k];
            row[m - k] *= filter[k];
        }
        row[m / 2] *= filter[m / 2];
        detail::fft(row, true);
        for (int d = 0; d < nd; ++d)
            filtered.at(a, d) = float(row[size_t(d)].real());
    }

    return backproject(filtered, out_side, pixel_mm, det_spacing);
}

namespace ref {

Image2D forward_project(const Image2D& mu, float pixel_mm, int n_angles,
                        float det_spacing, int n_detectors)
{
    check_square(mu);
    const int nd = n_detectors > 0 ? n_detectors : default_detector_count(mu.w);
    Image2D sino(n_angles, nd);
    const double det_half = 0.5 * (nd - 1);
    for (int a = 0; a < n_angles; ++a) {
        const double theta = M_PI * double(a) / double(n_angles);
        for (int d = 0; d < nd; ++d) {
            const double s_mm = (double(d) - det_half) * det_spacing;
            sino.at(a, d) = float(project_ray(mu, pixel_mm, std::cos(theta), std::sin(theta), s_mm));
        }
    }
    return sino;
}

Image2D backproject(const Image2D& sino_slice, int out_side, float pixel_mm, float det_spacing)
{
    const int n_angles = sino_slice.h;
    const int nd = sino_slice.w;
    Image2D out(out_side, out_side);
    const double half = 0.5 * (out_side - 1);
    const double det_half = 0.5 * (nd - 1);
    for (int iy = 0; iy < out_side; ++iy)
        for (int ix = 0; ix < out_side; ++ix) {
            double acc = 0.0;
            for (int a = 0; a < n_angles; ++a) {
                const double theta = M_PI * double(a) / double(n_angles);
                const double s_mm = ((double(ix) - half) * pixel_mm) * std::cos(theta) +
                                    ((double(iy) - half) * pixel_mm) * std::sin(theta);
                const double pos = s_mm / det_spacing + det_half;
                if (pos < 0.0 || pos > double(nd - 1))
                    continue;
                const int d0 = int(pos) < nd - 1 ? int(pos) : nd - 2;
                const double f = pos - d0;
                acc += (1.0 - f) * sino_slice.at(a, d0) + f * sino_slice.at(a, d0 + 1);
            }
            out.at(iy, ix) = float(acc * M_PI / double(n_angles));
        }
    return out;
}

} // namespace ref

} // namespace ctnorm
