#include "ctnorm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ctnorm/compare.hpp"
#include "ctnorm/error.hpp"
#include "ctnorm/metrics.hpp"
#include "ctnorm/rng.hpp"
#include "ctnorm/stitch.hpp"
#include "ctnorm/svg.hpp"
#include "ctnorm/threading.hpp"

namespace ctnorm::pipeline {

using nlohmann::json;

namespace {

// returns false when the output should be left as is (Skip)
bool prepare_output(const std::filesystem::path& p, Overwrite mode)
{
    if (!std::filesystem::exists(p))
        return true;
    switch (mode) {
    case Overwrite::Fail:
        throw ExistsError("refusing to overwrite " + p.string() + " (use --force)");
    case Overwrite::Skip: return false;
    case Overwrite::Force: return true;
    }
    return true;
}

void note(const StageOptions& opt, const std::string& msg)
{
    if (opt.progress)
        (*opt.progress) << msg << '\n' << std::flush;
}

uint64_t fnv1a(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + p.string());
    uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i)
            h = (h ^ uint8_t(buf[i])) * 1099511628211ull;
        if (!in)
            break;
    }
    return h;
}

std::string hex64(uint64_t v)
{
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
    return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + p.string());
    out << text;
}

json load_json(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in)
        throw IoError("cannot open: " + p.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

} // namespace

void run_phantom(const Manifest& m, const StageOptions& opt)
{
    m.validate();
    for (int c = 0; c < m.n_cases; ++c) {
        const auto vol_path = m.phantom_path(c);
        const auto roi_path = m.rois_path(c);
        if (!prepare_output(vol_path, opt.overwrite)) {
            note(opt, "phantom " + vol_path.string() + " exists, skipping");
            continue;
        }
        std::filesystem::create_directories(vol_path.parent_path());
        PhantomResult res = generate_phantom(m.phantom, m.phantom_seed(c));
        save_volume(res.vol, vol_path);

        json j;
        j["grid"] = "reference";
        j["nz"] = m.phantom.nz_half / 2;
        json rois = json::array();
        for (const auto& r : res.nodule_rois)
            rois.push_back({{"z", r.z}, {"y", r.y}, {"x", r.x},
                            {"dz", r.dz}, {"dy", r.dy}, {"dx", r.dx}});
        j["rois"] = rois;
        write_text(roi_path, j.dump(2) + "\n");
        note(opt, "phantom " + vol_path.string());
    }
}

void run_scan(const Manifest& m, const StageOptions& opt)
{
    m.validate();
    for (int c = 0; c < m.n_cases; ++c) {
        const auto ph_path = m.phantom_path(c);
        if (!std::filesystem::exists(ph_path))
            throw IoError("missing phantom volume: " + ph_path.string() +
                          " (run the phantom stage first)");
        Volume phantom = load_volume(ph_path);

        std::vector<std::pair<std::string, const Scenario*>> all;
        all.emplace_back("ref", nullptr);
        for (const auto& s : m.scenarios)
            all.emplace_back(s.id, &s);

        for (const auto& [id, scen] : all) {
            const auto out_path = m.scan_path(c, id);
            if (!prepare_output(out_path, opt.overwrite)) {
                note(opt, "scan " + out_path.string() + " exists, skipping");
                continue;
            }
            std::filesystem::create_directories(out_path.parent_path());
            AcquisitionConfig cfg = m.acquisition_config(c, scen);
            if (opt.keep_sinograms) {
                Volume slabs = slab_average(phantom, cfg.thickness_mm);
                Sinogram sino = project_volume(slabs, cfg.n_angles);
                sino = inject_dose_noise(sino, cfg.dose, cfg.n0, cfg.seed);
                save_sinogram(sino, m.case_dir(c) / "scans" / (id + ".cts"));
            }
            save_volume(simulate_acquisition(phantom, cfg), out_path);
            note(opt, "scan " + out_path.string());
        }
    }
}

namespace {

std::vector<gan::CasePair> load_case_pairs(const Manifest& m, const std::string& scenario_id,
                                           const std::vector<int>& cases)
{
    std::vector<gan::CasePair> out;
    for (int c : cases) {
        const auto low_path = m.scan_path(c, scenario_id);
        const auto ref_path = m.scan_path(c, "ref");
        if (!std::filesystem::exists(low_path))
            throw IoError("missing scan: " + low_path.string() + " (run the scan stage first)");
        if (!std::filesystem::exists(ref_path))
            throw IoError("missing scan: " + ref_path.string() + " (run the scan stage first)");
        gan::CasePair p;
        p.low_unit = hu_to_unit(load_volume(low_path));
        p.ref_unit = hu_to_unit(load_volume(ref_path));
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

void run_train(const Manifest& m, const std::string& scenario_id, bool baseline_cnn,
               const StageOptions& opt)
{
    m.validate();
    m.scenario(scenario_id); // existence check
    const std::string method = baseline_cnn ? "cnn" : "gan";
    const auto dir = m.model_dir(scenario_id, method);
    std::filesystem::create_directories(dir);

    gan::TrainConfig cfg = m.train;
    cfg.seed = m.train_seed(scenario_id, method);
    if (baseline_cnn)
        cfg.alpha1 = 0.0;

    const uint64_t model_seed = hash_combine(m.seed, 0x6d6f64656cull); // same init for gan and cnn
    gan::Generator g(m.generator, model_seed);
    std::optional<gan::Discriminator> d;
    if (!baseline_cnn)
        d.emplace(m.discriminator, model_seed);

    auto train_data = load_case_pairs(m, scenario_id, m.train_cases);
    auto val_data = load_case_pairs(m, scenario_id, m.val_cases);

    json meta;
    meta["scenario"] = scenario_id;
    meta["method"] = method;
    meta["baseline_cnn"] = baseline_cnn;
    meta["alpha1"] = cfg.alpha1;
    meta["alpha2"] = cfg.alpha2;
    meta["seed"] = cfg.seed;
    meta["iterations"] = cfg.iterations;
    meta["generator"] = {{"n_resblocks", m.generator.n_resblocks},
                         {"channels", m.generator.channels}};
    meta["finished"] = false;
    write_text(dir / "meta.json", meta.dump(2) + "\n");

    auto progress = [&](const gan::TrainLogRow& row) {
        if (opt.progress && (row.iteration % 100 == 0 || row.has_val)) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s/%s iter %lld d=%.4f l1=%.5f%s", scenario_id.c_str(),
                          method.c_str(), (long long)row.iteration, row.d_loss, row.g_loss_l1,
                          row.has_val ? " [val]" : "");
            (*opt.progress) << buf << '\n' << std::flush;
        }
    };

    gan::train(g, d ? &*d : nullptr, train_data, val_data, cfg, dir, progress);

    meta["finished"] = true;
    write_text(dir / "meta.json", meta.dump(2) + "\n");
}

namespace {

gan::Generator load_generator_from_checkpoint(const std::filesystem::path& ckpt,
                                              const gan::GeneratorConfig& cfg)
{
    gan::Generator g(cfg, 0);
    auto ts = nn::load_checkpoint(ckpt);
    g.load_state(ts, "");
    return g;
}

void write_normalize_sidecar(const std::filesystem::path& out_path,
                             const std::filesystem::path& ckpt,
                             const std::filesystem::path& input, std::array<int, 3> tile,
                             int z_overlap, double wall_ms, const StageOptions& opt,
                             const std::filesystem::path& rel_base = {})
{
    // paths relative to the run root keep reports byte-identical across runs
    auto path_str = [&](const std::filesystem::path& p) {
        if (rel_base.empty())
            return p.string();
        std::error_code ec;
        const auto rel = std::filesystem::relative(p, rel_base, ec);
        return ec ? p.string() : rel.string();
    };
    json side;
    side["checkpoint"] = path_str(ckpt);
    side["checkpoint_fnv1a"] = hex64(fnv1a(ckpt));
    side["input"] = path_str(input);
    side["tile"] = {tile[0], tile[1], tile[2]};
    side["z_overlap"] = z_overlap;
    side["wall_ms"] = opt.deterministic ? 0.0 : wall_ms;
    std::filesystem::path sp = out_path;
    sp.replace_extension(".json");
    write_text(sp, side.dump(2) + "\n");
}

} // namespace

void normalize_file(const std::filesystem::path& checkpoint,
                    const std::filesystem::path& input, const std::filesystem::path& output,
                    std::array<int, 3> tile, int z_overlap, const StageOptions& opt)
{
    if (!prepare_output(output, opt.overwrite))
        return;
    if (!std::filesystem::exists(checkpoint))
        throw IoError("missing checkpoint: " + checkpoint.string());
    if (!std::filesystem::exists(input))
        throw IoError("missing input volume: " + input.string());

    // infer the generator architecture from a meta.json next to the
    // checkpoint when present
    gan::GeneratorConfig gcfg;
    const auto meta_path = checkpoint.parent_path() / "meta.json";
    if (std::filesystem::exists(meta_path)) {
        const json meta = load_json(meta_path);
        if (meta.contains("generator")) {
            gcfg.n_resblocks = meta["generator"].value("n_resblocks", gcfg.n_resblocks);
            gcfg.channels = meta["generator"].value("channels", gcfg.channels);
        }
    }
    gan::Generator g = load_generator_from_checkpoint(checkpoint, gcfg);
    Volume low = load_volume(input);

    const auto t0 = std::chrono::steady_clock::now();
    Volume out = gan::normalize_volume(g, low, tile, z_overlap);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(output.parent_path());
    save_volume(out, output);
    write_normalize_sidecar(output, checkpoint, input, tile, z_overlap, wall_ms, opt);
}

void run_normalize(const Manifest& m, const std::string& scenario_id, const std::string& method,
                   const StageOptions& opt)
{
    m.validate();
    const auto dir = m.model_dir(scenario_id, method);
    std::filesystem::path ckpt = dir / "best.ctw";
    if (!std::filesystem::exists(ckpt))
        ckpt = dir / "last.ctw";
    if (!std::filesystem::exists(ckpt))
        throw IoError("no checkpoint under " + dir.string() + " (run the train stage first)");

    gan::Generator g = load_generator_from_checkpoint(ckpt, m.generator);
    for (int c : m.test_cases) {
        const auto out_path = m.normalized_path(scenario_id, method, c);
        if (!prepare_output(out_path, opt.overwrite)) {
            note(opt, "normalized " + out_path.string() + " exists, skipping");
            continue;
        }
        const auto in_path = m.scan_path(c, scenario_id);
        if (!std::filesystem::exists(in_path))
            throw IoError("missing scan: " + in_path.string());
        Volume low = load_volume(in_path);
        const auto t0 = std::chrono::steady_clock::now();
        Volume out = gan::normalize_volume(g, low, m.tile, m.z_overlap);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        std::filesystem::create_directories(out_path.parent_path());
        save_volume(out, out_path);
        write_normalize_sidecar(out_path, ckpt, in_path, m.tile, m.z_overlap, wall_ms, opt,
                                m.root);
        note(opt, "normalized " + out_path.string());
    }
}

namespace {

std::vector<RoiBox> load_rois(const std::filesystem::path& p)
{
    const json j = load_json(p);
    std::vector<RoiBox> rois;
    for (const auto& r : j.at("rois"))
        rois.push_back({r.at("z").get<int>(), r.at("y").get<int>(), r.at("x").get<int>(),
                        r.at("dz").get<int>(), r.at("dy").get<int>(), r.at("dx").get<int>()});
    return rois;
}

json plane_means_json(const metrics::MetricReport& rep)
{
    auto val = [](double v) -> json {
        if (std::isinf(v))
            return "inf";
        return v;
    };
    json j;
    j["psnr"] = {{"axial", val(rep.plane(Plane::Axial).psnr_mean())},
                 {"coronal", val(rep.plane(Plane::Coronal).psnr_mean())},
                 {"sagittal", val(rep.plane(Plane::Sagittal).psnr_mean())}};
    j["ssim"] = {{"axial", rep.plane(Plane::Axial).ssim_mean()},
                 {"coronal", rep.plane(Plane::Coronal).ssim_mean()},
                 {"sagittal", rep.plane(Plane::Sagittal).ssim_mean()}};
    j["perceptual"] = {{"axial", rep.plane(Plane::Axial).perc_mean()},
                       {"coronal", rep.plane(Plane::Coronal).perc_mean()},
                       {"sagittal", rep.plane(Plane::Sagittal).perc_mean()}};
    return j;
}

double report_perc_mean(const metrics::MetricReport& rep)
{
    return (rep.plane(Plane::Axial).perc_mean() + rep.plane(Plane::Coronal).perc_mean() +
            rep.plane(Plane::Sagittal).perc_mean()) /
           3.0;
}

std::string fmt6(double v)
{
    if (std::isinf(v))
        return "inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

} // namespace

void run_evaluate(const Manifest& m, const StageOptions& opt)
{
    m.validate();
    if (m.test_cases.empty())
        throw ConfigError("manifest: evaluate needs a non-empty test split");
    const auto edir = m.eval_dir();
    std::filesystem::create_directories(edir / "boxplots");

    static const char* kMethods[2] = {"cnn", "gan"};

    // metric reports per (scenario, method) + raw input per scenario
    std::map<std::string, std::map<std::string, metrics::MetricReport>> reports;
    std::map<std::string, metrics::MetricReport> raw_reports;

    for (const auto& scen : m.scenarios) {
        for (int c : m.test_cases) {
            const Volume ref = load_volume(m.scan_path(c, "ref"));
            const Volume raw = load_volume(m.scan_path(c, scen.id));
            raw_reports[scen.id].merge(
                metrics::evaluate_volume_pair(resample_z_nearest(raw, ref.nz), ref));
            for (const char* method : kMethods) {
                const auto np = m.normalized_path(scen.id, method, c);
                if (!std::filesystem::exists(np))
                    throw IoError("missing normalized volume: " + np.string() +
                                  " (run the normalize stage first)");
                reports[scen.id][method].merge(
                    metrics::evaluate_volume_pair(load_volume(np), ref));
            }
        }
    }

    // Table-1-shaped outputs: rows metric x plane, columns scenario x method
    {
        std::ostringstream csv;
        csv << "scenario,method,metric,plane,mean,n,excluded_inf,skipped\n";
        static const Plane order[3] = {Plane::Axial, Plane::Coronal, Plane::Sagittal};
        for (const auto& scen : m.scenarios)
            for (const char* method : kMethods) {
                const auto& rep = reports[scen.id][method];
                for (Plane p : order)
                    csv << scen.id << ',' << method << ",psnr," << plane_name(p) << ','
                        << fmt6(rep.plane(p).psnr_mean()) << ',' << rep.plane(p).psnr_n << ','
                        << rep.plane(p).psnr_inf << ',' << rep.plane(p).skipped << '\n';
                for (Plane p : order)
                    csv << scen.id << ',' << method << ",ssim," << plane_name(p) << ','
                        << fmt6(rep.plane(p).ssim_mean()) << ',' << rep.plane(p).ssim_n << ",0,"
                        << rep.plane(p).skipped << '\n';
                for (Plane p : order)
                    csv << scen.id << ',' << method << ",perceptual," << plane_name(p) << ','
                        << fmt6(rep.plane(p).perc_mean()) << ',' << rep.plane(p).perc_n << ",0,"
                        << rep.plane(p).skipped << '\n';
            }
        write_text(edir / "metrics.csv", csv.str());

        json jm;
        for (const auto& scen : m.scenarios)
            for (const char* method : kMethods)
                jm[scen.id][method] = plane_means_json(reports[scen.id][method]);
        write_text(edir / "metrics.json", jm.dump(2) + "\n");

        std::ostringstream txt;
        txt << "metric  plane    ";
        for (const auto& scen : m.scenarios)
            for (const char* method : kMethods) {
                char buf[24];
                std::snprintf(buf, sizeof(buf), " %6s-%-3s", scen.id.c_str(), method);
                txt << buf;
            }
        txt << '\n';
        static const char* metric_names[3] = {"psnr", "ssim", "srfpd"};
        static const Plane order2[3] = {Plane::Axial, Plane::Coronal, Plane::Sagittal};
        for (int mi = 0; mi < 3; ++mi)
            for (Plane p : order2) {
                char head[24];
                std::snprintf(head, sizeof(head), "%-7s %-8s", metric_names[mi], plane_name(p));
                txt << head;
                for (const auto& scen : m.scenarios)
                    for (const char* method : kMethods) {
                        const auto& rep = reports[scen.id][method];
                        const double v = mi == 0   ? rep.plane(p).psnr_mean()
                                         : mi == 1 ? rep.plane(p).ssim_mean()
                                                   : rep.plane(p).perc_mean();
                        char buf[24];
                        std::snprintf(buf, sizeof(buf), " %10s", fmt6(v).c_str());
                        txt << buf;
                    }
                txt << '\n';
            }
        write_text(edir / "metrics.txt", txt.str());
    }

    // radiomics: nodule ROI features, errors, Wilcoxon tests, box plots
    json summary;
    std::ostringstream err_csv, wil_csv, box_csv;
    err_csv << "scenario,feature,method,roi,slice,candidate,reference,error\n";
    wil_csv << "scenario,feature,comparison,n,w,p,method,significant\n";
    box_csv << "scenario,feature,method,min,q1,median,q3,max,n\n";

    for (const auto& scen : m.scenarios) {
        std::map<std::string, std::vector<Volume>> roi_sets;
        std::vector<Volume> ref_rois;
        for (int c : m.test_cases) {
            const Volume ref = load_volume(m.scan_path(c, "ref"));
            const Volume raw_matched =
                resample_z_nearest(load_volume(m.scan_path(c, scen.id)), ref.nz);
            const Volume cnn = load_volume(m.normalized_path(scen.id, "cnn", c));
            const Volume gan = load_volume(m.normalized_path(scen.id, "gan", c));
            for (const auto& box : load_rois(m.rois_path(c))) {
                ref_rois.push_back(crop_roi(ref, box));
                roi_sets["raw"].push_back(crop_roi(raw_matched, box));
                roi_sets["cnn"].push_back(crop_roi(cnn, box));
                roi_sets["gan"].push_back(crop_roi(gan, box));
            }
        }
        if (ref_rois.empty())
            throw ConfigError("no nodule ROIs found for scenario " + scen.id);

        const auto comparisons = radiomics::compare_methods(roi_sets, ref_rois);

        int gan_better = 0;
        json jfeat;
        for (const auto& fc : comparisons) {
            for (const auto& [method, samples] : fc.errors)
                for (const auto& s : samples) {
                    char buf[200];
                    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%d,%.9g,%.9g,%.9g\n",
                                  scen.id.c_str(), fc.feature.c_str(), method.c_str(),
                                  s.roi_index, s.slice, s.candidate, s.reference, s.error);
                    err_csv << buf;
                }
            for (const auto& t : fc.tests) {
                char buf[200];
                std::snprintf(buf, sizeof(buf), "%s,%s,%s-vs-%s,%d,%.9g,%.9g,%s,%d\n",
                              scen.id.c_str(), fc.feature.c_str(), t.method_a.c_str(),
                              t.method_b.c_str(), t.result.n_effective, t.result.w_statistic,
                              t.result.p_value,
                              t.result.method == radiomics::WilcoxonResult::Method::Exact
                                  ? "exact"
                                  : "normal",
                              int(t.significant));
                wil_csv << buf;
            }

            std::vector<std::pair<std::string, radiomics::BoxStats>> boxes;
            for (const char* method : {"raw", "cnn", "gan"}) {
                const auto& bs = fc.box.at(method);
                boxes.emplace_back(method, bs);
                char buf[240];
                std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%lld\n",
                              scen.id.c_str(), fc.feature.c_str(), method, bs.min, bs.q1,
                              bs.median, bs.q3, bs.max, (long long)bs.n);
                box_csv << buf;
            }
            radiomics::write_boxplot_svg(edir / "boxplots" / (scen.id + "_" + fc.feature + ".svg"),
                                         fc.feature + " normalized error (" + scen.id + ")",
                                         boxes);

            const double gan_med = fc.box.at("gan").median;
            const double raw_med = fc.box.at("raw").median;
            if (gan_med < raw_med)
                ++gan_better;
            json jf;
            jf["gan_median"] = gan_med;
            jf["cnn_median"] = fc.box.at("cnn").median;
            jf["raw_median"] = raw_med;
            for (const auto& t : fc.tests)
                jf[t.method_a + "_vs_" + t.method_b + "_p"] = t.result.p_value;
            jfeat[fc.feature] = jf;
        }

        const auto& cnn_rep = reports[scen.id]["cnn"];
        const auto& gan_rep = reports[scen.id]["gan"];
        const double cnn_perc = report_perc_mean(cnn_rep);
        const double gan_perc = report_perc_mean(gan_rep);
        json js;
        js["metrics"] = {{"cnn", plane_means_json(cnn_rep)},
                         {"gan", plane_means_json(gan_rep)},
                         {"raw", plane_means_json(raw_reports[scen.id])}};
        js["perceptual_improvement_pct"] =
            cnn_perc > 0.0 ? 100.0 * (cnn_perc - gan_perc) / cnn_perc : 0.0;
        js["radiomics"] = {{"features_gan_better_than_raw", gan_better},
                           {"per_feature", jfeat}};
        summary["scenarios"][scen.id] = js;
    }

    write_text(edir / "radiomics_errors.csv", err_csv.str());
    write_text(edir / "wilcoxon.csv", wil_csv.str());
    write_text(edir / "boxplot_summary.csv", box_csv.str());
    write_text(edir / "summary.json", summary.dump(2) + "\n");
    note(opt, "evaluation written to " + edir.string());
}

void run_report(const Manifest& m, std::ostream& out)
{
    const auto edir = m.eval_dir();
    const auto metrics_txt = edir / "metrics.txt";
    const auto summary_path = edir / "summary.json";
    if (!std::filesystem::exists(metrics_txt) || !std::filesystem::exists(summary_path))
        throw IoError("no evaluation artifacts under " + edir.string() +
                      " (run the evaluate stage first)");
    std::ifstream in(metrics_txt);
    out << in.rdbuf() << '\n';
    const json summary = load_json(summary_path);
    for (const auto& [scen, js] : summary.at("scenarios").items()) {
        out << "scenario " << scen << ": perceptual improvement (gan vs cnn) "
            << fmt6(js.at("perceptual_improvement_pct").get<double>()) << "%, "
            << js.at("radiomics").at("features_gan_better_than_raw").get<int>()
            << "/9 features improved vs raw\n";
    }
}

} // namespace ctnorm::pipeline
