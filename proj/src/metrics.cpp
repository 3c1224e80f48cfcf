#include "ctnorm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ctnorm/error.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm::metrics {

namespace {

void check_same_shape(const Image2D& a, const Image2D& b, const char* who)
{
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(who) + ": image shapes differ");
}

} // namespace

double psnr(const Image2D& a, const Image2D& b)
{
    check_same_shape(a, b, "psnr");
    double se = 0.0;
    for (size_t i = 0; i < a.pix.size(); ++i) {
        const double d = double(a.pix[i]) - double(b.pix[i]);
        se += d * d;
    }
    const double mse = se / double(a.pix.size());
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kSsimWin = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// separable Gaussian, "valid" region only (centers where the window fits)
void gauss_valid(const std::vector<double>& src, int h, int w, std::vector<double>& out,
                 int& oh, int& ow)
{
    std::vector<double> tmp;
    double k[kSsimWin];
    double sum = 0.0;
    for (int i = 0; i < kSsimWin; ++i) {
        const double d = i - (kSsimWin - 1) / 2.0;
        k[i] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (auto& v : k)
        v /= sum;

    ow = w - kSsimWin + 1;
    oh = h - kSsimWin + 1;
    tmp.assign(size_t(h) * ow, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWin; ++i)
                acc += k[i] * src[size_t(y) * w + x + i];
            tmp[size_t(y) * ow + x] = acc;
        }
    out.assign(size_t(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWin; ++i)
                acc += k[i] * tmp[size_t(y + i) * ow + x];
            out[size_t(y) * ow + x] = acc;
        }
}

} // namespace

double ssim(const Image2D& a, const Image2D& b)
{
    check_same_shape(a, b, "ssim");
    if (a.h < kSsimWin || a.w < kSsimWin)
        throw ShapeError("ssim: image smaller than the 11x11 window");

    const size_t n = a.pix.size();
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (size_t i = 0; i < n; ++i) {
        const double va = a.pix[i], vb = b.pix[i];
        pa[i] = va;
        pb[i] = vb;
        paa[i] = va * va;
        pbb[i] = vb * vb;
        pab[i] = va * vb;
    }
    std::vector<double> ma, mb, maa, mbb, mab;
    int oh = 0, ow = 0;
    gauss_valid(pa, a.h, a.w, ma, oh, ow);
    gauss_valid(pb, a.h, a.w, mb, oh, ow);
    gauss_valid(paa, a.h, a.w, maa, oh, ow);
    gauss_valid(pbb, a.h, a.w, mbb, oh, ow);
    gauss_valid(pab, a.h, a.w, mab, oh, ow);

    double acc = 0.0;
    for (size_t i = 0; i < ma.size(); ++i) {
        const double mu_a = ma[i], mu_b = mb[i];
        const double var_a = maa[i] - mu_a * mu_a;
        const double var_b = mbb[i] - mu_b * mu_b;
        const double cov = mab[i] - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
        acc += num / den;
    }
    return acc / double(ma.size());
}

namespace {

struct SrfStage {
    int cin, cout;
    std::vector<float> w; // (cout, cin, 3, 3)
};

std::array<SrfStage, 3> make_srf_stages(uint64_t seed)
{
    std::array<SrfStage, 3> stages{SrfStage{1, 8, {}}, SrfStage{8, 16, {}}, SrfStage{16, 32, {}}};
    for (size_t s = 0; s < stages.size(); ++s) {
        auto& st = stages[s];
        st.w.resize(size_t(st.cout) * st.cin * 9);
        StreamRng rng(seed, 0x737266ull + s); // "srf" per stage
        const double std_dev = std::sqrt(2.0 / (double(st.cin) * 9.0));
        for (auto& v : st.w)
            v = float(rng.normal() * std_dev);
    }
    return stages;
}

// conv 3x3 stride 2 pad 1 + LeakyReLU(0.2); chw layout
void srf_conv(const std::vector<float>& in, int cin, int h, int w, const SrfStage& st,
              std::vector<float>& out, int& oh, int& ow)
{
    oh = (h + 2 - 3) / 2 + 1;
    ow = (w + 2 - 3) / 2 + 1;
    out.assign(size_t(st.cout) * oh * ow, 0.0f);
    for (int co = 0; co < st.cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = oy * 2 + ky - 1;
                        if (iy < 0 || iy >= h)
                            continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = ox * 2 + kx - 1;
                            if (ix < 0 || ix >= w)
                                continue;
                            acc += double(in[(size_t(ci) * h + iy) * w + ix]) *
                                   double(st.w[((size_t(co) * cin + ci) * 3 + ky) * 3 + kx]);
                        }
                    }
                const float v = float(acc);
                out[(size_t(co) * oh + oy) * ow + ox] = v >= 0.0f ? v : 0.2f * v;
            }
}

// squared difference of channel-unit-normalized features, averaged over
// channels and positions. Normalized values are materialized before the
// subtraction so identical inputs give a distance of exactly zero.
double srf_stage_distance(const std::vector<float>& fa, const std::vector<float>& fb, int c,
                          int h, int w)
{
    double acc = 0.0;
    const size_t hw = size_t(h) * w;
    std::vector<double> va(static_cast<size_t>(c), 0.0), vb(static_cast<size_t>(c), 0.0);
    for (size_t p = 0; p < hw; ++p) {
        double na = 0.0, nb = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double xa = fa[size_t(ch) * hw + p];
            const double xb = fb[size_t(ch) * hw + p];
            na += xa * xa;
            nb += xb * xb;
        }
        const double ia = 1.0 / std::sqrt(na + 1e-10);
        const double ib = 1.0 / std::sqrt(nb + 1e-10);
        for (int ch = 0; ch < c; ++ch) {
            va[size_t(ch)] = fa[size_t(ch) * hw + p] * ia;
            vb[size_t(ch)] = fb[size_t(ch) * hw + p] * ib;
        }
        for (int ch = 0; ch < c; ++ch) {
            const double d = va[size_t(ch)] - vb[size_t(ch)];
            acc += d * d;
        }
    }
    return acc / (double(hw) * c);
}

} // namespace

double perceptual_distance(const Image2D& a, const Image2D& b, uint64_t seed)
{
    check_same_shape(a, b, "perceptual_distance");
    if (a.h < 32 || a.w < 32)
        throw ShapeError("perceptual_distance: images must be at least 32x32");

    const auto stages = make_srf_stages(seed);
    std::vector<float> fa(a.pix.begin(), a.pix.end());
    std::vector<float> fb(b.pix.begin(), b.pix.end());
    int c = 1, h = a.h, w = a.w;
    double total = 0.0;
    for (const auto& st : stages) {
        std::vector<float> oa, ob;
        int oh = 0, ow = 0;
        srf_conv(fa, c, h, w, st, oa, oh, ow);
        srf_conv(fb, c, h, w, st, ob, oh, ow);
        total += srf_stage_distance(oa, ob, st.cout, oh, ow);
        fa.swap(oa);
        fb.swap(ob);
        c = st.cout;
        h = oh;
        w = ow;
    }
    return total / double(stages.size());
}

double PlaneStats::psnr_mean() const
{
    if (psnr_n == 0)
        return psnr_inf > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    return psnr_sum / double(psnr_n);
}

void MetricReport::merge(const MetricReport& o)
{
    for (size_t i = 0; i < planes.size(); ++i) {
        planes[i].psnr_sum += o.planes[i].psnr_sum;
        planes[i].psnr_n += o.planes[i].psnr_n;
        planes[i].psnr_inf += o.planes[i].psnr_inf;
        planes[i].ssim_sum += o.planes[i].ssim_sum;
        planes[i].ssim_n += o.planes[i].ssim_n;
        planes[i].perc_sum += o.planes[i].perc_sum;
        planes[i].perc_n += o.planes[i].perc_n;
        planes[i].skipped += o.planes[i].skipped;
    }
}

namespace {

std::string fmt_double(double v)
{
    if (std::isinf(v))
        return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

std::string MetricReport::to_csv() const
{
    std::ostringstream os;
    os << "metric,plane,mean,n,excluded_inf,skipped\n";
    static const Plane order[3] = {Plane::Axial, Plane::Coronal, Plane::Sagittal};
    for (Plane p : order)
        os << "psnr," << plane_name(p) << ',' << fmt_double(plane(p).psnr_mean()) << ','
           << plane(p).psnr_n << ',' << plane(p).psnr_inf << ',' << plane(p).skipped << '\n';
    for (Plane p : order)
        os << "ssim," << plane_name(p) << ',' << fmt_double(plane(p).ssim_mean()) << ','
           << plane(p).ssim_n << ",0," << plane(p).skipped << '\n';
    for (Plane p : order)
        os << "perceptual," << plane_name(p) << ',' << fmt_double(plane(p).perc_mean()) << ','
           << plane(p).perc_n << ",0," << plane(p).skipped << '\n';
    return os.str();
}

std::string MetricReport::to_json() const
{
    std::ostringstream os;
    os << "{";
    static const Plane order[3] = {Plane::Axial, Plane::Coronal, Plane::Sagittal};
    const char* metric_names[3] = {"psnr", "ssim", "perceptual"};
    for (int m = 0; m < 3; ++m) {
        os << '"' << metric_names[m] << "\":{";
        for (int pi = 0; pi < 3; ++pi) {
            const Plane p = order[pi];
            const double v = m == 0   ? plane(p).psnr_mean()
                             : m == 1 ? plane(p).ssim_mean()
                                      : plane(p).perc_mean();
            os << '"' << plane_name(p) << "\":";
            if (std::isinf(v))
                os << "\"inf\"";
            else
                os << fmt_double(v);
            if (pi < 2)
                os << ',';
        }
        os << '}';
        if (m < 2)
            os << ',';
    }
    os << '}';
    return os.str();
}

std::string MetricReport::pretty() const
{
    std::ostringstream os;
    auto row = [&](const char* name, double ax, double co, double sa) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-12s %10s %10s %10s\n", name, fmt_double(ax).c_str(),
                      fmt_double(co).c_str(), fmt_double(sa).c_str());
        os << buf;
    };
    os << "metric            axial    coronal   sagittal\n";
    row("PSNR(dB)", plane(Plane::Axial).psnr_mean(), plane(Plane::Coronal).psnr_mean(),
        plane(Plane::Sagittal).psnr_mean());
    row("SSIM", plane(Plane::Axial).ssim_mean(), plane(Plane::Coronal).ssim_mean(),
        plane(Plane::Sagittal).ssim_mean());
    row("SRF-PD", plane(Plane::Axial).perc_mean(), plane(Plane::Coronal).perc_mean(),
        plane(Plane::Sagittal).perc_mean());
    return os.str();
}

MetricReport evaluate_volume_pair(const Volume& candidate, const Volume& reference)
{
    if (candidate.nz != reference.nz || candidate.ny != reference.ny ||
        candidate.nx != reference.nx)
        throw ShapeError("evaluate_volume_pair: volume dims differ");

    const Volume cu = hu_to_unit(candidate);
    const Volume ru = hu_to_unit(reference);

    MetricReport rep;
    static const Plane order[3] = {Plane::Axial, Plane::Coronal, Plane::Sagittal};
    for (Plane p : order) {
        PlaneStats& st = rep.planes[size_t(p)];
        const int n = plane_slice_count(cu, p);
        std::vector<double> psnr_v(static_cast<size_t>(n), 0.0);
        std::vector<double> ssim_v(static_cast<size_t>(n), 0.0);
        std::vector<double> perc_v(static_cast<size_t>(n), 0.0);
        std::vector<uint8_t> ok(static_cast<size_t>(n), 0);
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            const Image2D ca = plane_slice(cu, p, i);
            const Image2D ra = plane_slice(ru, p, i);
            if (ca.h < kSsimWin || ca.w < kSsimWin || ca.h < 32 || ca.w < 32) {
                ok[size_t(i)] = 2; // undersized for the windowed metrics
                continue;
            }
            psnr_v[size_t(i)] = psnr(ca, ra);
            ssim_v[size_t(i)] = ssim(ca, ra);
            perc_v[size_t(i)] = perceptual_distance(ca, ra);
            ok[size_t(i)] = 1;
        }
        for (int i = 0; i < n; ++i) {
            if (ok[size_t(i)] == 2) {
                st.skipped++;
                continue;
            }
            if (std::isinf(psnr_v[size_t(i)]))
                st.psnr_inf++;
            else {
                st.psnr_sum += psnr_v[size_t(i)];
                st.psnr_n++;
            }
            st.ssim_sum += ssim_v[size_t(i)];
            st.ssim_n++;
            st.perc_sum += perc_v[size_t(i)];
            st.perc_n++;
        }
    }
    return rep;
}

} // namespace ctnorm::metrics
