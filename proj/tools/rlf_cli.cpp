// Command-line front end: train, eval, bench.
//
// Exit codes: 0 success, 2 argument error, 3 data/format error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <rlf/rlf.hpp>

namespace {

// Argument-level failures discovered after CLI11 parsing.
struct ArgError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataArgs {
    std::string path;
    std::string format;
    std::string labels_path;  // idx only
    std::uint32_t label_column = 0;
};

void add_data_flags(CLI::App* cmd, DataArgs& args, const std::string& prefix) {
    const std::string data_flag = prefix.empty() ? "--data" : "--" + prefix;
    cmd->add_option(data_flag, args.path, "input dataset path")->required();
    cmd->add_option(prefix.empty() ? "--labels" : "--" + prefix + "-labels", args.labels_path,
                    "label file (idx format only)");
    if (prefix != "test")  // bench shares one --label-column between train and test
        cmd->add_option("--label-column", args.label_column, "label column for csv input");
}

rlf::Dataset load_data(const DataArgs& args, std::uint32_t feature_dim_override = 0,
                       std::uint32_t num_classes_override = 0) {
    if (args.format == "libsvm")
        return rlf::io::load_libsvm(args.path, feature_dim_override, num_classes_override);
    if (args.format == "csv")
        return rlf::io::load_csv(args.path, args.label_column, num_classes_override);
    if (args.format == "idx") {
        if (args.labels_path.empty())
            throw ArgError("idx format requires a label file (--labels / --train-labels / --test-labels)");
        return rlf::io::load_idx(args.path, args.labels_path, num_classes_override);
    }
    throw ArgError("--format: unknown format '" + args.format + "'");
}

std::uint32_t parse_feature_pool(const std::string& text) {
    if (text == "auto") return rlf::kAutoFeaturePool;
    std::uint32_t v = 0;
    const auto* end = text.data() + text.size();
    const auto res = std::from_chars(text.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end || v < 1)
        throw ArgError("--features: expected 'auto' or a positive integer, got '" + text + "'");
    return v;
}

std::vector<std::uint32_t> parse_grid(const std::string& text, const char* flag) {
    std::vector<std::uint32_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::uint32_t v = 0;
        const auto* end = item.data() + item.size();
        const auto res = std::from_chars(item.data(), end, v);
        if (res.ec != std::errc{} || res.ptr != end || v < 1)
            throw ArgError(std::string(flag) + ": expected comma-separated positive integers");
        out.push_back(v);
    }
    if (out.empty()) throw ArgError(std::string(flag) + ": empty list");
    return out;
}

struct HyperFlags {
    std::string features = "auto";
    std::uint32_t thresholds = 10;
    std::uint32_t residual_iters = 1;
    double epsilon = 1e-6;
    std::uint64_t seed = 0;
};

void add_hyper_flags(CLI::App* cmd, HyperFlags& h) {
    cmd->add_option("--features", h.features, "features sampled per node: 'auto' (= ceil(sqrt(d))) or a count");
    cmd->add_option("--thresholds", h.thresholds, "thresholds sampled per feature")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--residual-iters", h.residual_iters, "fixed-point iterations per leaf")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epsilon", h.epsilon, "residual floor before taking logs");
    cmd->add_option("--seed", h.seed, "master seed for all randomized behavior");
}

void apply_hyper_flags(rlf::TrainConfig& cfg, const HyperFlags& h) {
    cfg.feature_pool = parse_feature_pool(h.features);
    cfg.thresholds_per_feature = h.thresholds;
    cfg.residual_iterations = h.residual_iters;
    if (!(h.epsilon > 0.0) || !(h.epsilon < 1.0))
        throw ArgError("--epsilon: must lie in (0, 1)");
    cfg.epsilon = h.epsilon;
    cfg.seed = h.seed;
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw rlf::FormatError("cannot open " + tmp);
        f << text;
        if (!f) throw rlf::FormatError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

int cmd_train(const DataArgs& data, const std::string& method, std::uint32_t trees,
              std::uint32_t depth, const HyperFlags& hyper, const std::string& out_path) {
    rlf::TrainConfig cfg;
    cfg.num_trees = trees;
    cfg.max_depth = depth;
    apply_hyper_flags(cfg, hyper);

    const auto ds = load_data(data);
    rlf::ForestModel forest;
    if (method == "rlf") {
        auto result = rlf::train::train_forest(ds, cfg);
        forest = std::move(result.forest);
        std::printf("tree,train_loss\n");
        for (std::size_t t = 0; t < result.loss_trace.size(); ++t)
            std::printf("%zu,%.12g\n", t, result.loss_trace[t]);
    } else {
        forest = rlf::baseline::train_rf(ds, cfg);
    }
    rlf::io::save_model(forest, out_path);
    std::fprintf(stderr, "wrote %s model with %zu trees to %s\n", method.c_str(),
                 forest.trees.size(), out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& model_path, const DataArgs& data) {
    const auto forest = rlf::io::load_model(model_path);
    const auto ds = load_data(data, forest.feature_dim, forest.num_classes);
    std::printf("%.6f\n", rlf::harness::evaluate_error(forest, ds));
    return 0;
}

int cmd_bench(const DataArgs& train_args, const DataArgs& test_args, const std::string& methods,
              std::uint32_t runs, const std::string& trees_grid, const std::string& depth_grid,
              const HyperFlags& hyper, const std::string& out_path) {
    rlf::TrainConfig cfg;
    apply_hyper_flags(cfg, hyper);
    const auto trees = parse_grid(trees_grid, "--trees-grid");
    const auto depths = parse_grid(depth_grid, "--depth-grid");

    std::vector<rlf::ForestKind> kinds;
    std::stringstream ss(methods);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "rlf")
            kinds.push_back(rlf::ForestKind::RLF);
        else if (item == "rf")
            kinds.push_back(rlf::ForestKind::RF);
        else
            throw ArgError("--methods: unknown method '" + item + "'");
    }
    if (kinds.empty()) throw ArgError("--methods: empty list");

    const auto train_ds = load_data(train_args);
    const auto test_ds = load_data(test_args, train_ds.feature_dim, train_ds.num_classes);

    std::vector<rlf::harness::ExperimentResult> cells;
    for (const auto kind : kinds) {
        auto part = rlf::harness::learning_curve(train_ds, test_ds, cfg, kind, trees, depths, runs);
        for (auto& cell : part) cells.push_back(std::move(cell));
    }

    std::ostringstream csv;
    rlf::harness::write_csv(csv, cells);
    write_text_atomic(out_path, csv.str());

    const rlf::harness::ExperimentResult* reference = nullptr;
    for (const auto& cell : cells) {
        if (cell.method == rlf::ForestKind::RF) {
            reference = &cell;
            break;
        }
    }
    if (reference != nullptr) {
        for (const auto& cell : cells) {
            if (cell.method != rlf::ForestKind::RLF) continue;
            std::printf("compression rf[depth=%u,trees=%u] / rlf[depth=%u,trees=%u] = %.4f\n",
                        reference->config.max_depth, reference->config.num_trees,
                        cell.config.max_depth, cell.config.num_trees,
                        rlf::harness::compression_ratio(*reference, cell));
        }
    }
    std::fprintf(stderr, "wrote %zu benchmark rows to %s\n", cells.size(), out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual Likelihood Forests: training, evaluation, benchmarking"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a model and write it to disk");
    DataArgs train_data;
    add_data_flags(train, train_data, "");
    train->add_option("--format", train_data.format, "libsvm|csv|idx")
        ->required()
        ->check(CLI::IsMember({"libsvm", "csv", "idx"}));
    std::string method = "rlf";
    train->add_option("--method", method, "rlf|rf")->check(CLI::IsMember({"rlf", "rf"}));
    std::uint32_t trees = 100, depth = 15;
    train->add_option("--trees", trees, "ensemble size")->check(CLI::PositiveNumber);
    train->add_option("--depth", depth, "maximum tree depth")->check(CLI::PositiveNumber);
    HyperFlags train_hyper;
    add_hyper_flags(train, train_hyper);
    std::string model_out;
    train->add_option("--out", model_out, "output model path")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a model, print classification error");
    std::string model_path;
    eval->add_option("--model", model_path, "model file")->required();
    DataArgs eval_data;
    add_data_flags(eval, eval_data, "");
    eval->add_option("--format", eval_data.format, "libsvm|csv|idx")
        ->required()
        ->check(CLI::IsMember({"libsvm", "csv", "idx"}));

    // bench
    auto* bench = app.add_subcommand("bench", "multi-seed experiment grid, CSV output");
    DataArgs bench_train, bench_test;
    add_data_flags(bench, bench_train, "train");
    add_data_flags(bench, bench_test, "test");
    std::string bench_format;
    bench->add_option("--format", bench_format, "libsvm|csv|idx")
        ->required()
        ->check(CLI::IsMember({"libsvm", "csv", "idx"}));
    std::string methods = "rlf,rf";
    bench->add_option("--methods", methods, "comma list of rlf,rf");
    std::uint32_t runs = 10;
    bench->add_option("--runs", runs, "independently seeded runs per cell")
        ->check(CLI::PositiveNumber);
    std::string trees_grid = "100", depth_grid = "15";
    bench->add_option("--trees-grid", trees_grid, "comma list of ensemble sizes");
    bench->add_option("--depth-grid", depth_grid, "comma list of depths");
    HyperFlags bench_hyper;
    add_hyper_flags(bench, bench_hyper);
    std::string csv_out;
    bench->add_option("--out", csv_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(train_data, method, trees, depth, train_hyper, model_out);
        if (eval->parsed()) return cmd_eval(model_path, eval_data);
        bench_train.format = bench_format;
        bench_test.format = bench_format;
        bench_test.label_column = bench_train.label_column;
        return cmd_bench(bench_train, bench_test, methods, runs, trees_grid, depth_grid,
                         bench_hyper, csv_out);
    } catch (const ArgError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const rlf::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const rlf::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const rlf::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
