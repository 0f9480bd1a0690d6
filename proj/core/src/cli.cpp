#include "vinispec/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <stdexcept>
#include <string_view>

#include <CLI11.hpp>

#include "vinispec/dataset.hpp"
#include "vinispec/errors.hpp"
#include "vinispec/evaluate.hpp"
#include "vinispec/featurize.hpp"
#include "vinispec/fsio.hpp"
#include "vinispec/importance.hpp"
#include "vinispec/manifest.hpp"
#include "vinispec/synth.hpp"
#include "vinispec/textio.hpp"
#include "vinispec/version.hpp"

namespace fs = std::filesystem;

namespace vinispec::cli {

namespace {

/// Bad flag values and malformed config entries; reported with exit code 2.
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

double parse_double_value(const std::string& key, const std::string& text) {
    double value = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw UsageError(key + ": expected a number, got '" + text + "'");
    }
    return value;
}

std::size_t parse_size_value(const std::string& key, const std::string& text) {
    std::size_t value = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw UsageError(key + ": expected a non-negative integer, got '" +
                         text + "'");
    }
    return value;
}

std::string trimmed(std::string_view text) {
    std::size_t first = 0;
    std::size_t last = text.size();
    while (first < last && (text[first] == ' ' || text[first] == '\t')) {
        ++first;
    }
    while (last > first &&
           (text[last - 1] == ' ' || text[last - 1] == '\t' ||
            text[last - 1] == '\r')) {
        --last;
    }
    return std::string(text.substr(first, last - first));
}

struct Hyper {
    eval::SvmParams svm;
    eval::ForestParams forest;
    eval::NetParams network;
};

/// key=value lines; '#' starts a comment line; unknown keys are errors.
Hyper load_hyper_file(const std::string& path) {
    Hyper h;
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw UsageError(std::string("--config: ") + e.what());
    }
    std::size_t line_no = 0;
    std::string_view rest = text;
    while (!rest.empty()) {
        const std::size_t eol = rest.find('\n');
        const std::string_view raw =
            eol == std::string_view::npos ? rest : rest.substr(0, eol);
        rest = eol == std::string_view::npos ? std::string_view{}
                                             : rest.substr(eol + 1);
        ++line_no;
        const std::string line = trimmed(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--config: line " + std::to_string(line_no) +
                             ": expected key=value, got '" + line + "'");
        }
        const std::string key = trimmed(std::string_view(line).substr(0, eq));
        const std::string value =
            trimmed(std::string_view(line).substr(eq + 1));
        if (key == "svm.C") {
            h.svm.C = parse_double_value(key, value);
        } else if (key == "svm.epsilon") {
            h.svm.epsilon = parse_double_value(key, value);
        } else if (key == "svm.tol") {
            h.svm.tol = parse_double_value(key, value);
        } else if (key == "svm.max_iter") {
            h.svm.max_iter = parse_size_value(key, value);
        } else if (key == "forest.n_trees") {
            h.forest.n_trees = parse_size_value(key, value);
        } else if (key == "forest.max_features") {
            h.forest.max_features = parse_size_value(key, value);
        } else if (key == "forest.min_samples_leaf") {
            h.forest.min_samples_leaf = parse_size_value(key, value);
        } else if (key == "network.hidden_width") {
            h.network.hidden_width = parse_size_value(key, value);
        } else if (key == "network.conv_filters") {
            h.network.conv_filters = parse_size_value(key, value);
        } else if (key == "network.conv_kernel") {
            h.network.conv_kernel = parse_size_value(key, value);
        } else if (key == "network.pool_width") {
            h.network.pool_width = parse_size_value(key, value);
        } else if (key == "network.lstm_hidden") {
            h.network.lstm_hidden = parse_size_value(key, value);
        } else if (key == "network.learning_rate") {
            h.network.learning_rate = parse_double_value(key, value);
        } else if (key == "network.beta1") {
            h.network.beta1 = parse_double_value(key, value);
        } else if (key == "network.beta2") {
            h.network.beta2 = parse_double_value(key, value);
        } else if (key == "network.epochs") {
            h.network.epochs = parse_size_value(key, value);
        } else if (key == "network.batch_size") {
            h.network.batch_size = parse_size_value(key, value);
        } else {
            throw UsageError("--config: line " + std::to_string(line_no) +
                             ": unknown key '" + key + "'");
        }
    }
    return h;
}

std::pair<int, int> parse_window_flag(const std::string& text) {
    const std::size_t colon = text.find(':');
    auto fail = [&]() -> std::pair<int, int> {
        throw UsageError("--window expects LO:HI in nm, got '" + text + "'");
    };
    if (colon == std::string::npos) {
        return fail();
    }
    int lo = 0;
    int hi = 0;
    const char* mid = text.data() + colon;
    const char* end = text.data() + text.size();
    const auto r1 = std::from_chars(text.data(), mid, lo);
    const auto r2 = std::from_chars(mid + 1, end, hi);
    if (r1.ec != std::errc{} || r1.ptr != mid || r2.ec != std::errc{} ||
        r2.ptr != end) {
        return fail();
    }
    return {lo, hi};
}

template <typename Parser>
auto parse_flag(const char* flag, Parser&& parser) {
    try {
        return parser();
    } catch (const Error& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
}

std::string window_text(const std::optional<std::pair<int, int>>& window) {
    if (!window) {
        return "full";
    }
    return std::to_string(window->first) + ":" +
           std::to_string(window->second);
}

void append_hyper_spec(std::vector<std::pair<std::string, std::string>>& spec,
                       const Hyper& hyper) {
    auto num = [](double v) { return format_significant(v, 12); };
    spec.emplace_back("svm.C", num(hyper.svm.C));
    spec.emplace_back("svm.epsilon", num(hyper.svm.epsilon));
    spec.emplace_back("svm.tol", num(hyper.svm.tol));
    spec.emplace_back("svm.max_iter", std::to_string(hyper.svm.max_iter));
    spec.emplace_back("forest.n_trees", std::to_string(hyper.forest.n_trees));
    spec.emplace_back("forest.max_features",
                      std::to_string(hyper.forest.max_features));
    spec.emplace_back("forest.min_samples_leaf",
                      std::to_string(hyper.forest.min_samples_leaf));
    spec.emplace_back("network.hidden_width",
                      std::to_string(hyper.network.hidden_width));
    spec.emplace_back("network.conv_filters",
                      std::to_string(hyper.network.conv_filters));
    spec.emplace_back("network.conv_kernel",
                      std::to_string(hyper.network.conv_kernel));
    spec.emplace_back("network.pool_width",
                      std::to_string(hyper.network.pool_width));
    spec.emplace_back("network.lstm_hidden",
                      std::to_string(hyper.network.lstm_hidden));
    spec.emplace_back("network.learning_rate",
                      num(hyper.network.learning_rate));
    spec.emplace_back("network.beta1", num(hyper.network.beta1));
    spec.emplace_back("network.beta2", num(hyper.network.beta2));
    spec.emplace_back("network.epochs", std::to_string(hyper.network.epochs));
    spec.emplace_back("network.batch_size",
                      std::to_string(hyper.network.batch_size));
}

struct SynthFlags {
    std::uint64_t seed = 0;
    std::size_t juices = 31;
    std::size_t replicates = 3;
    std::size_t regions = 2;
    std::size_t vineyards = 4;
    double noise = 0.03;
    std::string out_path;
};

int run_synth(const SynthFlags& flags, std::ostream& out) {
    synth::SynthConfig config = synth::default_synth_config(flags.seed);
    config.n_juices = flags.juices;
    config.replicates_per_juice = flags.replicates;
    config.n_regions = flags.regions;
    config.n_vineyards = flags.vineyards;
    config.noise_sd = flags.noise;
    const Dataset dataset = synth::generate_synthetic_dataset(config);
    write_dataset_file(dataset, flags.out_path);
    out << "wrote " << dataset.samples.size() << " samples (" << flags.juices
        << " juices x " << flags.replicates << " replicates) to "
        << flags.out_path << "\n";
    return 0;
}

int run_validate(const std::string& data_path, std::ostream& out) {
    const Dataset dataset = read_dataset_file(data_path);
    const auto groups = group_by_juice(dataset);
    out << "ok: " << dataset.samples.size() << " samples, " << groups.size()
        << " juices, grid " << dataset.grid.start_nm << "-"
        << dataset.grid.end_nm << " nm step " << dataset.grid.step_nm << "\n";
    return 0;
}

struct EvaluateFlags {
    std::string data_path;
    std::string task;
    std::string model = "all";
    std::string cv = "loso";
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string window;
    std::string config_path;
    std::size_t threads = 1;
};

int run_evaluate(const EvaluateFlags& flags, std::ostream& out) {
    const Target target =
        parse_flag("--task", [&] { return parse_target(flags.task); });
    const eval::CvScheme scheme =
        parse_flag("--cv", [&] { return eval::parse_cv_scheme(flags.cv); });
    std::vector<eval::ModelKind> kinds;
    if (flags.model == "all") {
        kinds = eval::all_model_kinds();
    } else {
        kinds.push_back(parse_flag(
            "--model", [&] { return eval::parse_model_kind(flags.model); }));
    }
    FeatureSpec features;
    features.target = target;
    const bool regression = is_regression_target(target);
    features.include_chemistry = !regression;
    features.include_harvest_type = !regression;
    if (!flags.window.empty()) {
        features.wavelength_window = parse_window_flag(flags.window);
    }
    Hyper hyper;
    if (!flags.config_path.empty()) {
        hyper = load_hyper_file(flags.config_path);
    }

    const std::string content = read_text_file(flags.data_path);
    const Dataset dataset = parse_dataset_csv(content);
    fs::create_directories(flags.out_dir);

    const bool single = kinds.size() == 1;
    for (const eval::ModelKind kind : kinds) {
        eval::ModelSpec spec;
        spec.kind = kind;
        spec.svm = hyper.svm;
        spec.forest = hyper.forest;
        spec.network = hyper.network;
        const eval::ResultTable table = eval::run_experiment(
            dataset, features, spec, scheme, flags.seed, flags.threads);
        const std::string prefix =
            single ? ""
                   : std::string(eval::model_kind_name(kind)) + "." +
                         std::string(eval::cv_scheme_name(scheme)) + ".";
        write_text_file_atomic(fs::path(flags.out_dir) /
                                   (prefix + "metrics.json"),
                               eval::metrics_json(table));
        write_text_file_atomic(fs::path(flags.out_dir) /
                                   (prefix + "predictions.csv"),
                               eval::predictions_csv(table));
        out << table.model << " " << table.cv << " " << table.task << ":";
        for (const auto& [name, value] : table.metrics) {
            out << " " << name << "=" << format_fixed(value, 3);
        }
        out << "\n";
    }

    RunManifest manifest;
    manifest.command = "evaluate --data " + flags.data_path + " --task " +
                       flags.task + " --model " + flags.model + " --cv " +
                       flags.cv + " --seed " + std::to_string(flags.seed);
    if (!flags.window.empty()) {
        manifest.command += " --window " + flags.window;
    }
    if (!flags.config_path.empty()) {
        manifest.command += " --config " + flags.config_path;
    }
    manifest.seed = flags.seed;
    manifest.input_path = flags.data_path;
    manifest.input_hash = fnv1a64_hex(content);
    manifest.spec.emplace_back("task", std::string(target_name(target)));
    manifest.spec.emplace_back("cv",
                               std::string(eval::cv_scheme_name(scheme)));
    std::string model_names;
    for (const eval::ModelKind kind : kinds) {
        if (!model_names.empty()) {
            model_names += ",";
        }
        model_names += eval::model_kind_name(kind);
    }
    manifest.spec.emplace_back("models", model_names);
    manifest.spec.emplace_back("window", window_text(features.wavelength_window));
    manifest.spec.emplace_back("chemistry",
                               features.include_chemistry ? "true" : "false");
    manifest.spec.emplace_back(
        "harvest", features.include_harvest_type ? "true" : "false");
    append_hyper_spec(manifest.spec, hyper);
    write_text_file_atomic(fs::path(flags.out_dir) / "manifest.json",
                           manifest_json(manifest));
    return 0;
}

struct RankFlags {
    std::string data_path;
    std::string task;
    std::size_t top = 5;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string window;
    std::string config_path;
};

int run_rank(const RankFlags& flags, std::ostream& out) {
    const Target target =
        parse_flag("--task", [&] { return parse_target(flags.task); });
    FeatureSpec features;
    features.target = target;
    const bool regression = is_regression_target(target);
    features.include_chemistry = !regression;
    features.include_harvest_type = !regression;
    if (!flags.window.empty()) {
        features.wavelength_window = parse_window_flag(flags.window);
    }
    Hyper hyper;
    if (!flags.config_path.empty()) {
        hyper = load_hyper_file(flags.config_path);
    }

    const std::string content = read_text_file(flags.data_path);
    const Dataset dataset = parse_dataset_csv(content);
    fs::create_directories(flags.out_dir);

    importance::ImportanceParams params;
    params.svm = hyper.svm;
    params.forest = hyper.forest;
    params.seed = flags.seed;
    std::vector<importance::ImportanceCurve> curves;
    for (const importance::Method method :
         {importance::Method::rf, importance::Method::svm}) {
        curves.push_back(
            importance::compute_importance(dataset, features, method, params));
    }
    write_text_file_atomic(fs::path(flags.out_dir) / "importance.csv",
                           importance::importance_csv(curves));
    write_text_file_atomic(fs::path(flags.out_dir) / "topk.csv",
                           importance::topk_csv(curves, flags.top));
    for (const importance::ImportanceCurve& curve : curves) {
        const auto ranked = importance::top_k_wavelengths(curve, flags.top);
        out << importance::method_name(curve.method)
            << " top-1: " << ranked.front().column_name;
        if (ranked.front().wavelength_nm) {
            out << " (" << *ranked.front().wavelength_nm << " nm)";
        }
        out << "\n";
    }

    RunManifest manifest;
    manifest.command = "rank --data " + flags.data_path + " --task " +
                       flags.task + " --top " + std::to_string(flags.top) +
                       " --seed " + std::to_string(flags.seed);
    if (!flags.window.empty()) {
        manifest.command += " --window " + flags.window;
    }
    if (!flags.config_path.empty()) {
        manifest.command += " --config " + flags.config_path;
    }
    manifest.seed = flags.seed;
    manifest.input_path = flags.data_path;
    manifest.input_hash = fnv1a64_hex(content);
    manifest.spec.emplace_back("task", std::string(target_name(target)));
    manifest.spec.emplace_back("methods", "rf,svm");
    manifest.spec.emplace_back("top", std::to_string(flags.top));
    manifest.spec.emplace_back("window", window_text(features.wavelength_window));
    manifest.spec.emplace_back("chemistry",
                               features.include_chemistry ? "true" : "false");
    manifest.spec.emplace_back(
        "harvest", features.include_harvest_type ? "true" : "false");
    manifest.spec.emplace_back("importance.training", "full-dataset");
    manifest.spec.emplace_back("importance.normalization",
                               "per-target-method-minmax");
    append_hyper_spec(manifest.spec, hyper);
    write_text_file_atomic(fs::path(flags.out_dir) / "manifest.json",
                           manifest_json(manifest));
    return 0;
}

struct ReportFlags {
    std::string data_dir;
    std::string format = "md";
    std::string out_path;
};

int run_report(const ReportFlags& flags, std::ostream& out) {
    const eval::ReportFormat format = parse_flag(
        "--format", [&] { return eval::parse_report_format(flags.format); });
    std::vector<std::string> files;
    {
        std::error_code ec;
        fs::directory_iterator it(flags.data_dir, ec);
        if (ec) {
            throw IoError("cannot read directory '" + flags.data_dir +
                          "': " + ec.message());
        }
        for (const fs::directory_entry& entry : it) {
            if (!entry.is_regular_file()) {
                continue;
            }
            const std::string name = entry.path().filename().string();
            if (name == "metrics.json" || name.ends_with(".metrics.json")) {
                files.push_back(entry.path().string());
            }
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw IoError("no metrics.json files in '" + flags.data_dir + "'");
    }
    std::vector<eval::ResultTable> tables;
    tables.reserve(files.size());
    for (const std::string& file : files) {
        tables.push_back(
            eval::result_table_from_metrics_json(read_text_file(file)));
    }
    const std::string text = eval::format_report(tables, format);
    if (flags.out_path.empty()) {
        out << text;
    } else {
        write_text_file_atomic(flags.out_path, text);
        out << "wrote report over " << tables.size() << " result tables to "
            << flags.out_path << "\n";
    }
    return 0;
}

} // namespace

int execute(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    CLI::App app{"UV-Vis grape juice spectra toolkit"};
    app.name("vinispec");
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    SynthFlags synth_flags;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic dataset CSV");
    synth_cmd->add_option("--seed", synth_flags.seed, "master seed");
    synth_cmd->add_option("--juices", synth_flags.juices, "juice count");
    synth_cmd->add_option("--replicates", synth_flags.replicates,
                          "replicates per juice");
    synth_cmd->add_option("--regions", synth_flags.regions, "region count");
    synth_cmd->add_option("--vineyards", synth_flags.vineyards,
                          "vineyard count");
    synth_cmd->add_option("--noise", synth_flags.noise,
                          "instrument noise sd in AU");
    synth_cmd->add_option("--out", synth_flags.out_path, "output CSV path")
        ->required();

    std::string validate_data;
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "parse a dataset CSV and report");
    validate_cmd->add_option("--data", validate_data, "dataset CSV path")
        ->required();

    EvaluateFlags eval_flags;
    CLI::App* evaluate_cmd = app.add_subcommand(
        "evaluate", "run cross-validated experiments and write results");
    evaluate_cmd->add_option("--data", eval_flags.data_path, "dataset CSV path")
        ->required();
    evaluate_cmd
        ->add_option("--task", eval_flags.task,
                     "astringency|bitterness|herbaceous|region|vineyard")
        ->required();
    evaluate_cmd->add_option("--model", eval_flags.model,
                             "svm|rf|dnn1|dnn2|dnn3|cnn1d|lstm|bilstm|all");
    evaluate_cmd->add_option("--cv", eval_flags.cv, "loso|lojo");
    evaluate_cmd->add_option("--seed", eval_flags.seed, "master seed");
    evaluate_cmd->add_option("--out", eval_flags.out_dir, "output directory")
        ->required();
    evaluate_cmd->add_option("--window", eval_flags.window,
                             "wavelength window LO:HI in nm");
    evaluate_cmd->add_option("--config", eval_flags.config_path,
                             "key=value hyperparameter overrides");
    evaluate_cmd->add_option("--threads", eval_flags.threads,
                             "fold-level parallelism");

    RankFlags rank_flags;
    CLI::App* rank_cmd = app.add_subcommand(
        "rank", "score wavelength importance and write rankings");
    rank_cmd->add_option("--data", rank_flags.data_path, "dataset CSV path")
        ->required();
    rank_cmd
        ->add_option("--task", rank_flags.task,
                     "astringency|bitterness|herbaceous|region|vineyard")
        ->required();
    rank_cmd->add_option("--top", rank_flags.top, "ranking depth");
    rank_cmd->add_option("--seed", rank_flags.seed, "master seed");
    rank_cmd->add_option("--out", rank_flags.out_dir, "output directory")
        ->required();
    rank_cmd->add_option("--window", rank_flags.window,
                         "wavelength window LO:HI in nm");
    rank_cmd->add_option("--config", rank_flags.config_path,
                         "key=value hyperparameter overrides");

    ReportFlags report_flags;
    CLI::App* report_cmd = app.add_subcommand(
        "report", "render a model-by-metric grid from stored results");
    report_cmd
        ->add_option("--data", report_flags.data_dir,
                     "directory holding metrics.json files")
        ->required();
    report_cmd->add_option("--format", report_flags.format, "md|csv");
    report_cmd->add_option("--out", report_flags.out_path,
                           "report file (stdout when absent)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth_cmd) {
            return run_synth(synth_flags, out);
        }
        if (*validate_cmd) {
            return run_validate(validate_data, out);
        }
        if (*evaluate_cmd) {
            return run_evaluate(eval_flags, out);
        }
        if (*rank_cmd) {
            return run_rank(rank_flags, out);
        }
        if (*report_cmd) {
            return run_report(report_flags, out);
        }
        err << "error: no subcommand selected\n";
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace vinispec::cli
