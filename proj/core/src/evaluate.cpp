#include "vinispec/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "vinispec/errors.hpp"
#include "vinispec/forest.hpp"
#include "vinispec/neural.hpp"
#include "vinispec/rng.hpp"
#include "vinispec/svm.hpp"
#include "vinispec/textio.hpp"

namespace vinispec::eval {

namespace {

neural::Architecture architecture_of(ModelKind kind) {
    switch (kind) {
    case ModelKind::dnn1:
        return neural::Architecture::mlp1;
    case ModelKind::dnn2:
        return neural::Architecture::mlp2;
    case ModelKind::dnn3:
        return neural::Architecture::mlp3;
    case ModelKind::cnn1d:
        return neural::Architecture::cnn1d;
    case ModelKind::lstm:
        return neural::Architecture::lstm;
    case ModelKind::bilstm:
        return neural::Architecture::bilstm;
    default:
        throw InvalidSpecError("model kind has no network architecture");
    }
}

neural::NetworkConfig network_config_of(const ModelSpec& spec,
                                        std::uint64_t seed) {
    neural::NetworkConfig config;
    config.architecture = architecture_of(spec.kind);
    config.hidden_width = spec.network.hidden_width;
    config.conv_filters = spec.network.conv_filters;
    config.conv_kernel = spec.network.conv_kernel;
    config.pool_width = spec.network.pool_width;
    config.lstm_hidden = spec.network.lstm_hidden;
    config.learning_rate = spec.network.learning_rate;
    config.beta1 = spec.network.beta1;
    config.beta2 = spec.network.beta2;
    config.epochs = spec.network.epochs;
    config.batch_size = spec.network.batch_size;
    config.seed = seed;
    return config;
}

std::vector<double> fit_predict_regression(const ModelSpec& spec,
                                           const FeatureMatrix& Xtr,
                                           const std::vector<double>& ytr,
                                           const FeatureMatrix& Xte,
                                           std::uint64_t seed) {
    switch (spec.kind) {
    case ModelKind::svm: {
        svm::SvrConfig config;
        config.C = spec.svm.C;
        config.epsilon = spec.svm.epsilon;
        config.tol = spec.svm.tol;
        config.max_iter = spec.svm.max_iter;
        config.seed = seed;
        return svm::linear_predict(svm::train_linear_svr(Xtr, ytr, config),
                                   Xte);
    }
    case ModelKind::rf: {
        forest::ForestConfig config;
        config.n_trees = spec.forest.n_trees;
        config.max_features = spec.forest.max_features;
        config.min_samples_leaf = spec.forest.min_samples_leaf;
        config.seed = seed;
        return forest::rf_predict(forest::train_random_forest(Xtr, ytr, config),
                                  Xte);
    }
    default:
        return neural::network_predict(
            neural::train_network(Xtr, ytr, network_config_of(spec, seed)),
            Xte);
    }
}

std::vector<std::string>
fit_predict_classification(const ModelSpec& spec, const FeatureMatrix& Xtr,
                           const std::vector<std::string>& labels,
                           const FeatureMatrix& Xte, std::uint64_t seed) {
    switch (spec.kind) {
    case ModelKind::svm: {
        svm::SvcConfig config;
        config.C = spec.svm.C;
        config.tol = spec.svm.tol;
        config.max_iter = spec.svm.max_iter;
        config.seed = seed;
        return svm::linear_predict(svm::train_linear_svc(Xtr, labels, config),
                                   Xte);
    }
    case ModelKind::rf: {
        forest::ForestConfig config;
        config.n_trees = spec.forest.n_trees;
        config.max_features = spec.forest.max_features;
        config.min_samples_leaf = spec.forest.min_samples_leaf;
        config.seed = seed;
        return forest::rf_predict_classes(
            forest::train_random_forest(Xtr, labels, config), Xte);
    }
    default:
        return neural::network_predict_classes(
            neural::train_network(Xtr, labels, network_config_of(spec, seed)),
            Xte);
    }
}

bool is_regression_table(const ResultTable& table) {
    for (const auto& [name, value] : table.metrics) {
        if (name == "mae" || name == "rmse" || name == "evs") {
            return true;
        }
    }
    return false;
}

std::size_t model_rank(const std::string& name) {
    const auto& kinds = all_model_kinds();
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (model_kind_name(kinds[i]) == name) {
            return i;
        }
    }
    return kinds.size();
}

void push_unique(std::vector<std::string>& values, const std::string& v) {
    if (std::find(values.begin(), values.end(), v) == values.end()) {
        values.push_back(v);
    }
}

} // namespace

CvScheme parse_cv_scheme(std::string_view name) {
    if (name == "loso") {
        return CvScheme::loso;
    }
    if (name == "lojo") {
        return CvScheme::lojo;
    }
    throw InvalidSpecError("unknown cv scheme '" + std::string(name) +
                           "'; expected loso or lojo");
}

std::string_view cv_scheme_name(CvScheme scheme) {
    return scheme == CvScheme::loso ? "loso" : "lojo";
}

FoldPlan split_leave_one_sample_out(std::size_t n_samples) {
    if (n_samples < 2) {
        throw TooFewSamplesError(
            "leave-one-sample-out needs at least 2 samples, got " +
            std::to_string(n_samples));
    }
    FoldPlan plan;
    plan.folds.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Fold& fold = plan.folds[i];
        fold.test.push_back(i);
        fold.train.reserve(n_samples - 1);
        for (std::size_t j = 0; j < n_samples; ++j) {
            if (j != i) {
                fold.train.push_back(j);
            }
        }
    }
    return plan;
}

FoldPlan split_leave_one_sample_out(const Dataset& dataset) {
    return split_leave_one_sample_out(dataset.samples.size());
}

FoldPlan split_leave_one_juice_out(const Dataset& dataset) {
    const std::vector<JuiceGroup> groups = group_by_juice(dataset);
    if (groups.size() < 2) {
        throw TooFewGroupsError(
            "leave-one-juice-out needs at least 2 juices, got " +
            std::to_string(groups.size()));
    }
    const std::size_t n = dataset.samples.size();
    FoldPlan plan;
    plan.folds.resize(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Fold& fold = plan.folds[g];
        fold.test = groups[g].indices;
        std::vector<bool> held(n, false);
        for (std::size_t idx : fold.test) {
            held[idx] = true;
        }
        fold.train.reserve(n - fold.test.size());
        for (std::size_t j = 0; j < n; ++j) {
            if (!held[j]) {
                fold.train.push_back(j);
            }
        }
    }
    return plan;
}

ModelKind parse_model_kind(std::string_view name) {
    for (ModelKind kind : all_model_kinds()) {
        if (model_kind_name(kind) == name) {
            return kind;
        }
    }
    throw InvalidSpecError("unknown model '" + std::string(name) +
                           "'; expected one of svm, rf, dnn1, dnn2, dnn3, "
                           "cnn1d, lstm, bilstm");
}

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
    case ModelKind::svm:
        return "svm";
    case ModelKind::rf:
        return "rf";
    case ModelKind::dnn1:
        return "dnn1";
    case ModelKind::dnn2:
        return "dnn2";
    case ModelKind::dnn3:
        return "dnn3";
    case ModelKind::cnn1d:
        return "cnn1d";
    case ModelKind::lstm:
        return "lstm";
    case ModelKind::bilstm:
        return "bilstm";
    }
    return "";
}

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> kinds = {
        ModelKind::svm,  ModelKind::rf,    ModelKind::dnn1, ModelKind::dnn2,
        ModelKind::dnn3, ModelKind::cnn1d, ModelKind::lstm, ModelKind::bilstm};
    return kinds;
}

ResultTable run_experiment(const Dataset& dataset, const FeatureSpec& features,
                           const ModelSpec& model, CvScheme scheme,
                           std::uint64_t seed, std::size_t n_threads) {
    const AssembledFeatures assembled = assemble_features(dataset, features);
    const bool regression = is_regression_target(features.target);
    const FoldPlan plan = scheme == CvScheme::loso
                              ? split_leave_one_sample_out(dataset)
                              : split_leave_one_juice_out(dataset);
    const std::size_t n_folds = plan.folds.size();

    std::vector<std::vector<double>> fold_reg(n_folds);
    std::vector<std::vector<std::string>> fold_cls(n_folds);
    std::vector<std::exception_ptr> fold_error(n_folds);

    auto run_fold = [&](std::size_t fi) {
        try {
            const Fold& fold = plan.folds[fi];
            FeatureMatrix Xtr = assembled.matrix.subset(fold.train);
            const Standardizer standardizer = fit_standardizer(Xtr);
            Xtr = apply_standardizer(standardizer, Xtr);
            const FeatureMatrix Xte = apply_standardizer(
                standardizer, assembled.matrix.subset(fold.test));
            const std::uint64_t fold_seed = derive_seed(seed, fi);
            if (regression) {
                std::vector<double> ytr;
                ytr.reserve(fold.train.size());
                for (std::size_t idx : fold.train) {
                    ytr.push_back(assembled.regression_targets[idx]);
                }
                fold_reg[fi] =
                    fit_predict_regression(model, Xtr, ytr, Xte, fold_seed);
            } else {
                std::vector<std::string> ltr;
                ltr.reserve(fold.train.size());
                for (std::size_t idx : fold.train) {
                    ltr.push_back(assembled.class_targets[idx]);
                }
                fold_cls[fi] =
                    fit_predict_classification(model, Xtr, ltr, Xte, fold_seed);
            }
        } catch (...) {
            fold_error[fi] = std::current_exception();
        }
    };

    if (n_threads <= 1 || n_folds <= 1) {
        for (std::size_t fi = 0; fi < n_folds; ++fi) {
            run_fold(fi);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        const std::size_t count = std::min(n_threads, n_folds);
        workers.reserve(count);
        for (std::size_t t = 0; t < count; ++t) {
            workers.emplace_back([&] {
                for (std::size_t fi = next.fetch_add(1); fi < n_folds;
                     fi = next.fetch_add(1)) {
                    run_fold(fi);
                }
            });
        }
        for (std::thread& worker : workers) {
            worker.join();
        }
    }
    for (std::size_t fi = 0; fi < n_folds; ++fi) {
        if (fold_error[fi]) {
            std::rethrow_exception(fold_error[fi]);
        }
    }

    ResultTable table;
    table.task = std::string(target_name(features.target));
    table.model = std::string(model_kind_name(model.kind));
    table.cv = std::string(cv_scheme_name(scheme));
    table.seed = seed;
    table.predictions.kind =
        regression ? TaskKind::regression : TaskKind::classification;
    for (std::size_t fi = 0; fi < n_folds; ++fi) {
        const Fold& fold = plan.folds[fi];
        for (std::size_t j = 0; j < fold.test.size(); ++j) {
            const std::size_t idx = fold.test[j];
            table.sample_ids.push_back(assembled.matrix.row_sample_ids[idx]);
            table.fold_index.push_back(fi);
            if (regression) {
                table.predictions.y.push_back(
                    assembled.regression_targets[idx]);
                table.predictions.y_hat.push_back(fold_reg[fi][j]);
            } else {
                table.predictions.y_labels.push_back(
                    assembled.class_targets[idx]);
                table.predictions.y_hat_labels.push_back(fold_cls[fi][j]);
            }
        }
    }
    table.n_samples = table.predictions.size();
    if (regression) {
        const RegressionMetrics rm = regression_metrics(table.predictions);
        table.metrics = {
            {"mae", rm.mae}, {"rmse", rm.rmse}, {"evs", rm.evs}};
    } else {
        const ClassificationMetrics cm =
            classification_metrics(table.predictions);
        table.metrics = {{"accuracy", cm.accuracy}, {"f1", cm.macro_f1}};
    }
    return table;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "md") {
        return ReportFormat::markdown;
    }
    if (name == "csv") {
        return ReportFormat::csv;
    }
    throw InvalidSpecError("unknown report format '" + std::string(name) +
                           "'; expected md or csv");
}

std::string format_report(const std::vector<ResultTable>& tables,
                          ReportFormat format) {
    if (tables.empty()) {
        throw InvalidSpecError("report needs at least one result table");
    }
    const bool regression = is_regression_table(tables.front());
    for (const ResultTable& table : tables) {
        if (is_regression_table(table) != regression) {
            throw MixedLayoutError("cannot mix regression and classification "
                                   "tables in one report");
        }
    }

    std::vector<std::string> tasks;
    std::vector<std::string> cvs;
    std::vector<std::string> models;
    for (const ResultTable& table : tables) {
        push_unique(tasks, table.task);
        push_unique(models, table.model);
    }
    for (const char* scheme : {"loso", "lojo"}) {
        for (const ResultTable& table : tables) {
            if (table.cv == scheme) {
                push_unique(cvs, table.cv);
                break;
            }
        }
    }
    for (const ResultTable& table : tables) {
        push_unique(cvs, table.cv);
    }
    std::stable_sort(models.begin(), models.end(),
                     [](const std::string& a, const std::string& b) {
                         return model_rank(a) < model_rank(b);
                     });
    const std::vector<std::string> metric_names =
        regression ? std::vector<std::string>{"mae", "rmse", "evs"}
                   : std::vector<std::string>{"accuracy", "f1"};

    // (model, task, cv) → metric map; the latest table wins on duplicates.
    std::map<std::string, std::map<std::string, double>> cells;
    auto key_of = [](const std::string& model, const std::string& task,
                     const std::string& cv) {
        return model + "\x1f" + task + "\x1f" + cv;
    };
    for (const ResultTable& table : tables) {
        auto& cell = cells[key_of(table.model, table.task, table.cv)];
        for (const auto& [name, value] : table.metrics) {
            cell[name] = value;
        }
    }

    std::vector<std::string> headers;
    std::vector<std::tuple<std::string, std::string, std::string>> columns;
    for (const std::string& task : tasks) {
        for (const std::string& cv : cvs) {
            for (const std::string& metric : metric_names) {
                std::string header;
                if (tasks.size() > 1) {
                    header += task + " ";
                }
                if (cvs.size() > 1) {
                    header += cv + " ";
                }
                header += metric;
                headers.push_back(std::move(header));
                columns.emplace_back(task, cv, metric);
            }
        }
    }

    std::string out;
    const bool md = format == ReportFormat::markdown;
    if (md) {
        out += "| model |";
        for (const std::string& header : headers) {
            out += " " + header + " |";
        }
        out += "\n| --- |";
        for (std::size_t i = 0; i < headers.size(); ++i) {
            out += " --- |";
        }
        out += "\n";
    } else {
        out += "model";
        for (const std::string& header : headers) {
            out += "," + header;
        }
        out += "\n";
    }
    for (const std::string& model : models) {
        out += md ? "| " + model + " |" : model;
        for (const auto& [task, cv, metric] : columns) {
            std::string cell;
            const auto found = cells.find(key_of(model, task, cv));
            if (found != cells.end()) {
                const auto value = found->second.find(metric);
                if (value != found->second.end()) {
                    cell = format_fixed(value->second, 3);
                }
            }
            out += md ? " " + cell + " |" : "," + cell;
        }
        out += "\n";
    }
    return out;
}

std::string metrics_json(const ResultTable& table) {
    nlohmann::ordered_json doc;
    doc["task"] = table.task;
    doc["model"] = table.model;
    doc["cv"] = table.cv;
    doc["seed"] = table.seed;
    doc["n_samples"] = table.n_samples;
    nlohmann::ordered_json metrics;
    for (const auto& [name, value] : table.metrics) {
        metrics[name] = value;
    }
    doc["metrics"] = std::move(metrics);
    return doc.dump(2) + "\n";
}

ResultTable result_table_from_metrics_json(std::string_view text) {
    nlohmann::ordered_json doc =
        nlohmann::ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw MalformedValueError("metrics record is not a JSON object");
    }
    ResultTable table;
    try {
        table.task = doc.at("task").get<std::string>();
        table.model = doc.at("model").get<std::string>();
        table.cv = doc.at("cv").get<std::string>();
        table.seed = doc.at("seed").get<std::uint64_t>();
        table.n_samples = doc.at("n_samples").get<std::size_t>();
        for (const auto& [name, value] : doc.at("metrics").items()) {
            table.metrics.emplace_back(name, value.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedValueError(std::string("bad metrics record: ") +
                                  e.what());
    }
    return table;
}

std::string predictions_csv(const ResultTable& table) {
    std::string out = "sample_id,fold,y,yhat\n";
    const PredictionSet& p = table.predictions;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out += table.sample_ids[i];
        out += ',';
        out += std::to_string(table.fold_index[i]);
        out += ',';
        if (p.kind == TaskKind::regression) {
            out += format_significant(p.y[i], 6);
            out += ',';
            out += format_significant(p.y_hat[i], 6);
        } else {
            out += p.y_labels[i];
            out += ',';
            out += p.y_hat_labels[i];
        }
        out += '\n';
    }
    return out;
}

} // namespace vinispec::eval
