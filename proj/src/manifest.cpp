#include "ctnorm/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ctnorm/error.hpp"
#include "ctnorm/rng.hpp"

namespace ctnorm::pipeline {

using nlohmann::json;

void Manifest::validate() const
{
    if (root.empty())
        throw ConfigError("manifest: output_dir not set");
    if (n_cases < 1)
        throw ConfigError("manifest: need at least one case");
    std::set<int> seen;
    auto check_split = [&](const std::vector<int>& ids, const char* name) {
        for (int c : ids) {
            if (c < 0 || c >= n_cases)
                throw ConfigError(std::string("manifest: ") + name + " case index out of range");
            if (!seen.insert(c).second)
                throw ConfigError("manifest: case splits are not disjoint");
        }
    };
    check_split(train_cases, "train");
    check_split(val_cases, "val");
    check_split(test_cases, "test");

    std::set<std::string> ids;
    for (const auto& s : scenarios) {
        if (s.id.empty() || s.id == "ref")
            throw ConfigError("manifest: scenario id empty or reserved");
        if (!ids.insert(s.id).second)
            throw ConfigError("manifest: duplicate scenario id " + s.id);
        if (!(s.dose > 0.0) || s.dose > 1.0)
            throw ConfigError("manifest: scenario dose must lie in (0, 1]");
        if (s.thickness_mm != 1.0 && s.thickness_mm != 2.0)
            throw ConfigError("manifest: scenario thickness must be 1.0 or 2.0 mm");
    }
    if (scenarios.empty())
        throw ConfigError("manifest: need at least one scenario");

    phantom.validate();
    generator.validate();
    discriminator.validate();
    train.validate();
    if (tile[0] < 1 || tile[1] < 1 || tile[2] < 1 || z_overlap < 0)
        throw ConfigError("manifest: bad inference tile");
}

namespace {

std::string case_name(int c)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "case%02d", c);
    return buf;
}

} // namespace

std::filesystem::path Manifest::case_dir(int c) const
{
    return root / "cases" / case_name(c);
}
std::filesystem::path Manifest::phantom_path(int c) const
{
    return case_dir(c) / "phantom.ctv";
}
std::filesystem::path Manifest::rois_path(int c) const
{
    return case_dir(c) / "rois.json";
}
std::filesystem::path Manifest::scan_path(int c, const std::string& scenario) const
{
    return case_dir(c) / "scans" / (scenario + ".ctv");
}
std::filesystem::path Manifest::model_dir(const std::string& scenario,
                                          const std::string& method) const
{
    return root / "models" / scenario / method;
}
std::filesystem::path Manifest::normalized_path(const std::string& scenario,
                                                const std::string& method, int c) const
{
    return root / "normalized" / scenario / method / (case_name(c) + std::string(".ctv"));
}
std::filesystem::path Manifest::eval_dir() const
{
    return root / "eval";
}

const Scenario& Manifest::scenario(const std::string& id) const
{
    for (const auto& s : scenarios)
        if (s.id == id)
            return s;
    throw ConfigError("manifest: unknown scenario " + id);
}

uint64_t Manifest::phantom_seed(int c) const
{
    return hash_combine(seed, 0x7068616eull + uint64_t(c) * 1009);
}

uint64_t Manifest::scan_seed(int c, const std::string& scen) const
{
    uint64_t h = hash_combine(seed, 0x7363616eull + uint64_t(c) * 2003);
    for (char ch : scen)
        h = hash_combine(h, uint64_t(uint8_t(ch)));
    return h;
}

uint64_t Manifest::train_seed(const std::string& scen, const std::string& method) const
{
    uint64_t h = hash_combine(seed, 0x747261696eull);
    for (char ch : scen)
        h = hash_combine(h, uint64_t(uint8_t(ch)));
    for (char ch : method)
        h = hash_combine(h, uint64_t(uint8_t(ch)));
    return h;
}

AcquisitionConfig Manifest::acquisition_config(int c, const Scenario* s) const
{
    AcquisitionConfig cfg;
    cfg.n0 = n0;
    cfg.n_angles = n_angles;
    cfg.window = window;
    if (s) {
        cfg.dose = s->dose;
        cfg.thickness_mm = s->thickness_mm;
        cfg.seed = scan_seed(c, s->id);
    } else {
        cfg.dose = 1.0;
        cfg.thickness_mm = 1.0;
        cfg.seed = scan_seed(c, "ref");
    }
    return cfg;
}

Manifest load_manifest(const std::filesystem::path& json_path)
{
    std::ifstream in(json_path);
    if (!in)
        throw IoError("cannot open manifest: " + json_path.string());
    std::stringstream buf;
    buf << in.rdbuf();

    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }

    Manifest m;
    try {
        std::filesystem::path out = j.value("output_dir", std::string("run"));
        m.root = out.is_absolute() ? out : json_path.parent_path() / out;
        m.seed = j.value("seed", m.seed);
        if (j.contains("cases")) {
            const auto& c = j["cases"];
            m.n_cases = c.value("count", m.n_cases);
            if (c.contains("train"))
                m.train_cases = c["train"].get<std::vector<int>>();
            if (c.contains("val"))
                m.val_cases = c["val"].get<std::vector<int>>();
            if (c.contains("test"))
                m.test_cases = c["test"].get<std::vector<int>>();
        }
        if (j.contains("phantom"))
            m.phantom = phantom_spec_from_json(j["phantom"].dump());
        if (j.contains("acquisition")) {
            const auto& a = j["acquisition"];
            m.n0 = a.value("n0", m.n0);
            m.n_angles = a.value("n_angles", m.n_angles);
            m.window = window_from_name(a.value("window", std::string("hann")));
        }
        if (j.contains("scenarios")) {
            m.scenarios.clear();
            for (const auto& s : j["scenarios"])
                m.scenarios.push_back({s.at("id").get<std::string>(),
                                       s.value("dose", 0.25), s.value("thickness_mm", 2.0)});
        }
        if (j.contains("generator")) {
            m.generator.n_resblocks = j["generator"].value("n_resblocks", m.generator.n_resblocks);
            m.generator.channels = j["generator"].value("channels", m.generator.channels);
        }
        if (j.contains("discriminator")) {
            m.discriminator.n_stages =
                j["discriminator"].value("n_stages", m.discriminator.n_stages);
            m.discriminator.base_channels =
                j["discriminator"].value("base_channels", m.discriminator.base_channels);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            m.train.lr = t.value("lr", m.train.lr);
            m.train.beta1 = t.value("beta1", m.train.beta1);
            m.train.beta2 = t.value("beta2", m.train.beta2);
            m.train.alpha1 = t.value("alpha1", m.train.alpha1);
            m.train.alpha2 = t.value("alpha2", m.train.alpha2);
            m.train.d_g_ratio = t.value("d_g_ratio", m.train.d_g_ratio);
            m.train.batch = t.value("batch", m.train.batch);
            m.train.iterations = t.value("iterations", m.train.iterations);
            if (t.contains("patch")) {
                const auto& p = t["patch"];
                m.train.patch_d = p.at(0).get<int>();
                m.train.patch_h = p.at(1).get<int>();
                m.train.patch_w = p.at(2).get<int>();
            }
            m.train.body_tau = t.value("body_tau", m.train.body_tau);
            m.train.val_every = t.value("val_every", m.train.val_every);
            m.train.checkpoint_every = t.value("checkpoint_every", m.train.checkpoint_every);
        }
        if (j.contains("inference")) {
            const auto& i = j["inference"];
            if (i.contains("tile")) {
                m.tile[0] = i["tile"].at(0).get<int>();
                m.tile[1] = i["tile"].at(1).get<int>();
                m.tile[2] = i["tile"].at(2).get<int>();
            }
            m.z_overlap = i.value("z_overlap", m.z_overlap);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    m.validate();
    return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& json_path)
{
    json j;
    j["output_dir"] = m.root.string();
    j["seed"] = m.seed;
    j["cases"] = {{"count", m.n_cases},
                  {"train", m.train_cases},
                  {"val", m.val_cases},
                  {"test", m.test_cases}};
    j["phantom"] = json::parse(phantom_spec_to_json(m.phantom));
    j["acquisition"] = {{"n0", m.n0}, {"n_angles", m.n_angles}, {"window", window_name(m.window)}};
    json scen = json::array();
    for (const auto& s : m.scenarios)
        scen.push_back({{"id", s.id}, {"dose", s.dose}, {"thickness_mm", s.thickness_mm}});
    j["scenarios"] = scen;
    j["generator"] = {{"n_resblocks", m.generator.n_resblocks}, {"channels", m.generator.channels}};
    j["discriminator"] = {{"n_stages", m.discriminator.n_stages},
                          {"base_channels", m.discriminator.base_channels}};
    j["train"] = {{"lr", m.train.lr},
                  {"beta1", m.train.beta1},
                  {"beta2", m.train.beta2},
                  {"alpha1", m.train.alpha1},
                  {"alpha2", m.train.alpha2},
                  {"d_g_ratio", m.train.d_g_ratio},
                  {"batch", m.train.batch},
                  {"iterations", m.train.iterations},
                  {"patch", {m.train.patch_d, m.train.patch_h, m.train.patch_w}},
                  {"body_tau", m.train.body_tau},
                  {"val_every", m.train.val_every},
                  {"checkpoint_every", m.train.checkpoint_every}};
    j["inference"] = {{"tile", {m.tile[0], m.tile[1], m.tile[2]}}, {"z_overlap", m.z_overlap}};

    std::ofstream out(json_path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write manifest: " + json_path.string());
    out << j.dump(2) << '\n';
}

Manifest default_desk_manifest(const std::filesystem::path& root)
{
    Manifest m;
    m.root = root;
    return m;
}

} // namespace ctnorm::pipeline
