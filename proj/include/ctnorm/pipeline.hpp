#pragma once

#include <iosfwd>
#include <optional>

#include "ctnorm/manifest.hpp"

namespace ctnorm::pipeline {

enum class Overwrite { Fail, Skip, Force };

struct StageOptions {
    Overwrite overwrite = Overwrite::Fail;
    bool deterministic = false; // single-threaded, zeroed wall times
    bool keep_sinograms = false;
    std::ostream* progress = nullptr;
};

// phantom: one CTV1 volume + ROI manifest per case
void run_phantom(const Manifest& m, const StageOptions& opt);

// scan: reference acquisition plus every scenario for every case
void run_scan(const Manifest& m, const StageOptions& opt);

// train: one scenario, GAN ("gan") or L1 baseline ("cnn", alpha1 = 0);
// resumes from the last checkpoint when one exists
void run_train(const Manifest& m, const std::string& scenario_id, bool baseline_cnn,
               const StageOptions& opt);

// normalize: every test case of one scenario/method from its best checkpoint
void run_normalize(const Manifest& m, const std::string& scenario_id, const std::string& method,
                   const StageOptions& opt);

// single-file form used by the CLI: checkpoint + input volume -> output
void normalize_file(const std::filesystem::path& checkpoint,
                    const std::filesystem::path& input, const std::filesystem::path& output,
                    std::array<int, 3> tile, int z_overlap, const StageOptions& opt);

// evaluate: metric tables, radiomic error analysis, Wilcoxon tests,
// box-plot SVGs, and summary.json over the test split
void run_evaluate(const Manifest& m, const StageOptions& opt);

// report: render the stored evaluation artifacts to a stream
void run_report(const Manifest& m, std::ostream& out);

} // namespace ctnorm::pipeline
