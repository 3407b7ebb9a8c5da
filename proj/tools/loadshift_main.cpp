#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "loadshift/config.hpp"
#include "loadshift/pipeline.hpp"
#include "loadshift/util.hpp"

namespace {

using loadshift::config::Config;

std::vector<std::string> parse_method_list(const std::string& csv) {
    std::vector<std::string> out;
    for (const std::string& part : loadshift::util::split(csv, ',')) {
        const std::string m = loadshift::util::trim(part);
        if (!m.empty()) out.push_back(m);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"loadshift: demand-response load analytics pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string methods_csv;
    long long seed = -1;
    int jobs = 0;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--seed", seed, "override the run seed");
    app.add_option("--out-dir", out_dir, "override the output directory");
    app.add_option("--methods", methods_csv,
                   "comma-separated forecasting methods (ols,lasso,ridge,knn,svr,tree,iso)");
    app.add_option("--jobs", jobs, "worker threads for per-user stages");

    const std::map<std::string,
                   std::pair<const char*, std::function<void(const Config&)>>>
        stages = {
            {"ingest", {"load and validate input CSVs", loadshift::pipeline::run_ingest}},
            {"prep", {"standardize, partition, and build features", loadshift::pipeline::run_prep}},
            {"forecast", {"cross-validate and fit counterfactual models", loadshift::pipeline::run_forecast}},
            {"effects", {"estimate per-user treatment effects", loadshift::pipeline::run_effects}},
            {"segment", {"cluster load shapes and score variability", loadshift::pipeline::run_segment}},
            {"synth", {"generate synthetic data and run the recovery experiment", loadshift::pipeline::run_synth}},
            {"report", {"aggregate results into summary tables", loadshift::pipeline::run_report}},
            {"run-all", {"every stage in order (synth excluded)", loadshift::pipeline::run_all}},
        };
    for (const auto& [name, stage] : stages)
        app.add_subcommand(name, stage.first)->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        Config cfg = config_path.empty() ? loadshift::config::default_config()
                                         : loadshift::config::load_config(config_path);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!methods_csv.empty()) cfg.methods = parse_method_list(methods_csv);
        if (jobs > 0) cfg.jobs = jobs;
        loadshift::config::validate(cfg);

        const std::string chosen = app.get_subcommands().front()->get_name();
        stages.at(chosen).second(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
