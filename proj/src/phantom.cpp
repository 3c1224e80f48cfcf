#include "ctnorm/phantom.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ctnorm/error.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm {

namespace {

// 1 inside, 0 outside, half-cosine over [edge - half_width, edge + half_width]
double cos_ramp(double signed_dist, double half_width)
{
    if (signed_dist <= -half_width)
        return 1.0;
    if (signed_dist >= half_width)
        return 0.0;
    return 0.5 * (1.0 + std::cos(M_PI * (signed_dist + half_width) / (2.0 * half_width)));
}

// approximate signed distance (mm) to an axis-aligned ellipsoid surface
double ellipsoid_dist(const Vec3& p, const Vec3& c, const Vec3& ax)
{
    const double dz = (p[0] - c[0]) / ax[0];
    const double dy = (p[1] - c[1]) / ax[1];
    const double dx = (p[2] - c[2]) / ax[2];
    const double r = std::sqrt(dz * dz + dy * dy + dx * dx);
    const double scale = std::min({ax[0], ax[1], ax[2]});
    return (r - 1.0) * scale;
}

double point_segment_dist(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const Vec3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
    const double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    double t = len2 > 0.0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dz = ap[0] - t * ab[0];
    const double dy = ap[1] - t * ab[1];
    const double dx = ap[2] - t * ab[2];
    return std::sqrt(dz * dz + dy * dy + dx * dx);
}

struct VesselSeg {
    Vec3 a, b;
    double radius;
};

// separable Gaussian blur along one axis, kernel radius 3*sigma
void blur_axis(std::vector<float>& v, int nz, int ny, int nx, int axis, double sigma,
               double& kernel_l2)
{
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(size_t(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[size_t(i + radius)] = std::exp(-0.5 * double(i) * i / (sigma * sigma));
        sum += k[size_t(i + radius)];
    }
    double l2 = 0.0;
    for (auto& w : k) {
        w /= sum;
        l2 += w * w;
    }
    kernel_l2 = std::sqrt(l2);

    const int dims[3] = {nz, ny, nx};
    const size_t strides[3] = {size_t(ny) * nx, size_t(nx), 1};
    const int len = dims[axis];
    const size_t stride = strides[axis];

    std::vector<float> out(v.size());
#pragma omp parallel for collapse(2) schedule(static)
    for (int a0 = 0; a0 < (axis == 0 ? ny : nz); ++a0)
        for (int a1 = 0; a1 < (axis == 2 ? ny : nx); ++a1) {
            // base index of this line
            size_t base;
            if (axis == 0)
                base = size_t(a0) * nx + a1;
            else if (axis == 1)
                base = size_t(a0) * ny * nx + a1;
            else
                base = (size_t(a0) * ny + a1) * nx;
            for (int i = 0; i < len; ++i) {
                double acc = 0.0;
                for (int j = -radius; j <= radius; ++j) {
                    int p = std::clamp(i + j, 0, len - 1);
                    acc += k[size_t(j + radius)] * v[base + size_t(p) * stride];
                }
                out[base + size_t(i) * stride] = float(acc);
            }
        }
    v.swap(out);
}

} // namespace

double lung_membership(const PhantomSpec& spec, const Vec3& p_mm)
{
    double m = 0.0;
    for (const auto& lung : spec.lungs)
        m = std::max(m, cos_ramp(ellipsoid_dist(p_mm, lung.center_mm, lung.semi_axes_mm),
                                 0.5 * spec.in_plane_mm));
    return m;
}

void PhantomSpec::validate() const
{
    if (nx < 16 || ny < 16 || nz_half < 8 || !(in_plane_mm > 0.0))
        throw ConfigError("phantom grid too small or non-positive spacing");
    if (!(body_semi_x_mm > 0.0) || !(body_semi_y_mm > 0.0))
        throw ConfigError("body semi-axes must be positive");
    if (lungs.empty())
        throw ConfigError("phantom needs at least one lung");
    for (const auto& l : lungs)
        if (!(l.semi_axes_mm[0] > 0.0) || !(l.semi_axes_mm[1] > 0.0) || !(l.semi_axes_mm[2] > 0.0))
            throw ConfigError("lung semi-axes must be positive");
    if (!(vessel_radius_min_mm > 0.0) || vessel_radius_max_mm < vessel_radius_min_mm)
        throw ConfigError("vessel radius range invalid");
    for (double hu : {body_hu, lung_hu, air_hu, vessel_hu})
        if (hu < double(kHuMin) || hu > double(kHuMax))
            throw ConfigError("tissue HU outside [-1024, 3071]");
    for (const auto& n : nodules) {
        if (!(n.radius_mm > 0.0))
            throw ConfigError("nodule radius must be positive");
        if (n.core_hu < double(kHuMin) || n.core_hu > double(kHuMax) ||
            n.halo_hu < double(kHuMin) || n.halo_hu > double(kHuMax))
            throw ConfigError("nodule HU outside [-1024, 3071]");
        double inside = 0.0;
        for (const auto& lung : lungs)
            inside = std::max(inside,
                              -ellipsoid_dist(n.center_mm, lung.center_mm, lung.semi_axes_mm));
        if (inside < n.radius_mm * 0.5)
            throw ConfigError("nodule does not lie inside a lung region");
    }
    if (roi_dz < 2 || roi_hw < 8)
        throw ConfigError("roi extents too small");
}

PhantomResult generate_phantom(const PhantomSpec& spec, uint64_t seed)
{
    spec.validate();
    const int nz = spec.nz_half, ny = spec.ny, nx = spec.nx;
    Volume vol(nz, ny, nx, 0.5f, float(spec.in_plane_mm), float(spec.in_plane_mm));

    const double cz = 0.5 * (nz - 1), cy = 0.5 * (ny - 1), cx = 0.5 * (nx - 1);
    auto pos_mm = [&](int z, int y, int x) -> Vec3 {
        return {(double(z) - cz) * 0.5, (double(y) - cy) * spec.in_plane_mm,
                (double(x) - cx) * spec.in_plane_mm};
    };

    // lung texture: blurred white noise, rescaled to the requested amplitude
    std::vector<float> tex(vol.count());
    {
        StreamRng noise(seed, 0x746578ull); // "tex"
        for (auto& t : tex)
            t = float(noise.normal());
        double l2z = 1.0, l2y = 1.0, l2x = 1.0;
        blur_axis(tex, nz, ny, nx, 0, spec.texture_corr_vox, l2z);
        blur_axis(tex, nz, ny, nx, 1, spec.texture_corr_vox, l2y);
        blur_axis(tex, nz, ny, nx, 2, spec.texture_corr_vox, l2x);
        const float gain = float(spec.texture_amp_hu / (l2z * l2y * l2x));
        for (auto& t : tex)
            t *= gain;
    }

    // vessels: capsules dropped inside lungs, roughly longitudinal
    std::vector<VesselSeg> vessels;
    {
        StreamRng vr(seed, 0x76657373ull); // "vess"
        int placed = 0, guard = 0;
        while (placed < spec.vessel_count && guard < spec.vessel_count * 200) {
            ++guard;
            const auto& lung = spec.lungs[vr.below(spec.lungs.size())];
            Vec3 c{lung.center_mm[0] + (vr.uniform() * 2.0 - 1.0) * lung.semi_axes_mm[0] * 0.8,
                   lung.center_mm[1] + (vr.uniform() * 2.0 - 1.0) * lung.semi_axes_mm[1] * 0.8,
                   lung.center_mm[2] + (vr.uniform() * 2.0 - 1.0) * lung.semi_axes_mm[2] * 0.8};
            if (-ellipsoid_dist(c, lung.center_mm, lung.semi_axes_mm) < 1.0)
                continue;
            Vec3 dir{1.0, (vr.uniform() * 2.0 - 1.0) * 0.5, (vr.uniform() * 2.0 - 1.0) * 0.5};
            const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
            const double half_len = 0.6 * lung.semi_axes_mm[0];
            Vec3 a{c[0] - dir[0] / norm * half_len, c[1] - dir[1] / norm * half_len,
                   c[2] - dir[2] / norm * half_len};
            Vec3 b{c[0] + dir[0] / norm * half_len, c[1] + dir[1] / norm * half_len,
                   c[2] + dir[2] / norm * half_len};
            const double r = spec.vessel_radius_min_mm +
                             vr.uniform() * (spec.vessel_radius_max_mm - spec.vessel_radius_min_mm);
            vessels.push_back({a, b, r});
            ++placed;
        }
    }

    const double ramp_mm = 0.5 * spec.in_plane_mm;

#pragma omp parallel for collapse(2) schedule(static)
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const Vec3 p = pos_mm(z, y, x);

                // body ellipse in (x, y); elliptical-cylinder chest
                const double br = std::sqrt((p[2] / spec.body_semi_x_mm) * (p[2] / spec.body_semi_x_mm) +
                                            (p[1] / spec.body_semi_y_mm) * (p[1] / spec.body_semi_y_mm));
                const double body_w =
                    cos_ramp((br - 1.0) * std::min(spec.body_semi_x_mm, spec.body_semi_y_mm), ramp_mm);
                double hu = spec.air_hu + body_w * (spec.body_hu - spec.air_hu);

                const double lung_w = lung_membership(spec, p);
                if (lung_w > 0.0) {
                    double lung_val = spec.lung_hu + tex[vol.index(z, y, x)];
                    for (const auto& v : vessels) {
                        const double d = point_segment_dist(p, v.a, v.b);
                        const double w = cos_ramp(d - v.radius, ramp_mm);
                        if (w > 0.0)
                            lung_val += w * (spec.vessel_hu - lung_val);
                    }
                    hu += lung_w * (lung_val - hu);
                }

                for (const auto& nod : spec.nodules) {
                    const double dz = p[0] - nod.center_mm[0];
                    const double dy = p[1] - nod.center_mm[1];
                    const double dx = p[2] - nod.center_mm[2];
                    const double d = std::sqrt(dz * dz + dy * dy + dx * dx);
                    const double outer_w = cos_ramp(d - nod.radius_mm, ramp_mm);
                    if (outer_w <= 0.0)
                        continue;
                    if (nod.part_solid) {
                        const double core_r = std::min(2.4, 0.5 * nod.radius_mm);
                        const double core_w = cos_ramp(d - core_r, ramp_mm);
                        const double nod_hu = nod.halo_hu + core_w * (nod.core_hu - nod.halo_hu);
                        hu += outer_w * (nod_hu - hu);
                    } else {
                        hu += outer_w * (nod.core_hu - hu);
                    }
                }

                vol.at(z, y, x) = float(std::clamp(hu, double(kHuMin), double(kHuMax)));
            }

    // nodule ROI boxes on the 1.0mm reference grid
    PhantomResult res{std::move(vol), {}};
    const int nz_ref = nz / 2;
    const double cz_ref = 0.5 * (nz_ref - 1);
    for (const auto& nod : spec.nodules) {
        RoiBox box;
        box.dz = std::min(spec.roi_dz, nz_ref);
        box.dy = std::min(spec.roi_hw, ny);
        box.dx = std::min(spec.roi_hw, nx);
        const int zc = int(std::lround(nod.center_mm[0] / 1.0 + cz_ref));
        const int yc = int(std::lround(nod.center_mm[1] / spec.in_plane_mm + cy));
        const int xc = int(std::lround(nod.center_mm[2] / spec.in_plane_mm + cx));
        box.z = std::clamp(zc - box.dz / 2, 0, nz_ref - box.dz);
        box.y = std::clamp(yc - box.dy / 2, 0, ny - box.dy);
        box.x = std::clamp(xc - box.dx / 2, 0, nx - box.dx);
        res.nodule_rois.push_back(box);
    }
    return res;
}

namespace {

using nlohmann::json;

json vec3_to_json(const Vec3& v)
{
    return json::array({v[0], v[1], v[2]});
}

Vec3 vec3_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("expected [z, y, x] triple");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

std::string phantom_spec_to_json(const PhantomSpec& s)
{
    json j;
    j["grid"] = {{"nx", s.nx}, {"ny", s.ny}, {"nz_half", s.nz_half}, {"in_plane_mm", s.in_plane_mm}};
    j["body"] = {{"semi_y_mm", s.body_semi_y_mm}, {"semi_x_mm", s.body_semi_x_mm}, {"hu", s.body_hu}};
    j["air_hu"] = s.air_hu;
    json lungs = json::array();
    for (const auto& l : s.lungs)
        lungs.push_back({{"center_mm", vec3_to_json(l.center_mm)},
                         {"semi_axes_mm", vec3_to_json(l.semi_axes_mm)}});
    j["lungs"] = lungs;
    j["lung_hu"] = s.lung_hu;
    j["texture"] = {{"amp_hu", s.texture_amp_hu}, {"corr_vox", s.texture_corr_vox}};
    j["vessels"] = {{"count", s.vessel_count},
                    {"radius_min_mm", s.vessel_radius_min_mm},
                    {"radius_max_mm", s.vessel_radius_max_mm},
                    {"hu", s.vessel_hu}};
    json nods = json::array();
    for (const auto& n : s.nodules)
        nods.push_back({{"center_mm", vec3_to_json(n.center_mm)},
                        {"radius_mm", n.radius_mm},
                        {"core_hu", n.core_hu},
                        {"halo_hu", n.halo_hu},
                        {"part_solid", n.part_solid}});
    j["nodules"] = nods;
    j["roi"] = {{"dz", s.roi_dz}, {"hw", s.roi_hw}};
    return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("phantom spec: ") + e.what());
    }
    PhantomSpec s;
    try {
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            s.nx = g.value("nx", s.nx);
            s.ny = g.value("ny", s.ny);
            s.nz_half = g.value("nz_half", s.nz_half);
            s.in_plane_mm = g.value("in_plane_mm", s.in_plane_mm);
        }
        if (j.contains("body")) {
            const auto& b = j["body"];
            s.body_semi_y_mm = b.value("semi_y_mm", s.body_semi_y_mm);
            s.body_semi_x_mm = b.value("semi_x_mm", s.body_semi_x_mm);
            s.body_hu = b.value("hu", s.body_hu);
        }
        s.air_hu = j.value("air_hu", s.air_hu);
        s.lung_hu = j.value("lung_hu", s.lung_hu);
        if (j.contains("lungs")) {
            s.lungs.clear();
            for (const auto& l : j["lungs"])
                s.lungs.push_back({vec3_from_json(l.at("center_mm")),
                                   vec3_from_json(l.at("semi_axes_mm"))});
        }
        if (j.contains("texture")) {
            s.texture_amp_hu = j["texture"].value("amp_hu", s.texture_amp_hu);
            s.texture_corr_vox = j["texture"].value("corr_vox", s.texture_corr_vox);
        }
        if (j.contains("vessels")) {
            const auto& v = j["vessels"];
            s.vessel_count = v.value("count", s.vessel_count);
            s.vessel_radius_min_mm = v.value("radius_min_mm", s.vessel_radius_min_mm);
            s.vessel_radius_max_mm = v.value("radius_max_mm", s.vessel_radius_max_mm);
            s.vessel_hu = v.value("hu", s.vessel_hu);
        }
        if (j.contains("nodules")) {
            s.nodules.clear();
            for (const auto& n : j["nodules"])
                s.nodules.push_back({vec3_from_json(n.at("center_mm")), n.value("radius_mm", 3.0),
                                     n.value("core_hu", 40.0), n.value("halo_hu", -350.0),
                                     n.value("part_solid", true)});
        }
        if (j.contains("roi")) {
            s.roi_dz = j["roi"].value("dz", s.roi_dz);
            s.roi_hw = j["roi"].value("hw", s.roi_hw);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

} // namespace ctnorm
