#include "noiseproto/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "noiseproto/classifier.hpp"
#include "noiseproto/cleaner.hpp"
#include "noiseproto/cli/manifest.hpp"
#include "noiseproto/cli/pipeline.hpp"
#include "noiseproto/dataio.hpp"
#include "noiseproto/error.hpp"
#include "noiseproto/graph.hpp"
#include "noiseproto/prototypes.hpp"
#include "noiseproto/rng.hpp"

namespace fs = std::filesystem;

namespace noiseproto::cli {

namespace {

// --- schema fragments -------------------------------------------------------

const std::vector<KeySpec> kCommon = {
    {"out-dir", "out", "output directory"},
    {"seed", "0", "base random seed"},
    {"workers", "1", "worker pool size for per-class stages"},
};

const std::vector<KeySpec> kSynthKeys = {
    {"classes", "5", "number of synthetic classes"},
    {"dim", "64", "feature dimension"},
    {"clean-per-class", "5", "clean pool size per class"},
    {"noisy-per-class", "200", "noisy examples per class"},
    {"relevant-fraction", "0.2", "fraction of noisy examples drawn near the class center"},
    {"sigma-in", "0.05", "spread of clean/relevant features"},
    {"sigma-out", "0.3", "spread of distractor features"},
    {"queries-per-class", "50", "held-out query examples per class"},
};

const std::vector<KeySpec> kCleanKeys = {
    {"features", "", "directory of class_*.fnp feature files"},
    {"scorer", "gcn", "relevance scorer: gcn|beta|similarity"},
    {"loss", "simnoipro", "training loss: simnoipro|binary|simnoipro-min"},
    {"grouping", "windows", "noise grouping: windows|kmeans"},
    {"windows", "5", "number of noise groups T"},
    {"alpha-schedule", "increasing", "per-group weights: increasing|equal|decreasing"},
    {"alpha-lo", "0.2", "low endpoint of the alpha schedule"},
    {"alpha-hi", "1.0", "high endpoint of the alpha schedule"},
    {"beta", "1.0", "weight of the global noise term in the loss"},
    {"lambda", "1.0", "noisy-term balance of the binary baseline loss"},
    {"iterations", "100", "training iterations per class"},
    {"lr", "0.1", "initial learning rate"},
    {"lr-decay-factor", "0.1", "step-decay factor"},
    {"lr-decay-period", "30", "iterations between decays"},
    {"weight-decay", "0.0005", "L2 weight decay"},
    {"hidden-dim", "0", "GCN hidden width (0 = max(16, d/4))"},
    {"k-neighbors", "10", "mutual kNN degree of the affinity graph"},
    {"beta-weight", "1.0", "constant score for the beta scorer"},
};

const std::vector<KeySpec> kClassifierKeys = {
    {"batch-size", "512", "minibatch size"},
    {"epochs", "50", "training epochs"},
    {"temperature", "15", "cosine softmax temperature"},
    {"clf-lr", "0.1", "classifier initial learning rate"},
    {"clf-lr-final", "0.001", "classifier final learning rate (cosine annealing)"},
    {"clf-weight-decay", "0", "classifier L2 weight decay"},
};

const std::vector<KeySpec> kEvalKeys = {
    {"queries", "", "directory of queries_*.fnp files"},
    {"classifier", "", "evaluate this saved classifier instead of running the pipeline"},
    {"protos", "", "evaluate saved prototypes instead of running the pipeline"},
    {"shots", "5", "comma-separated clean shots per trial"},
    {"trials", "5", "trials per shot"},
    {"prototype-nn", "false", "classify by nearest prototype instead of training"},
};

std::vector<KeySpec> merge(std::initializer_list<std::vector<KeySpec>> groups) {
    std::vector<KeySpec> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
}

// --- shared helpers ---------------------------------------------------------

std::string class_file(const std::string& dir, const char* prefix, std::uint32_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04u.fnp", prefix, id);
    return (fs::path(dir) / buf).string();
}

std::string scores_file(const std::string& dir, std::uint32_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scores_%04u.csv", id);
    return (fs::path(dir) / buf).string();
}

std::string trace_file(const std::string& dir, std::uint32_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "trace_%04u.csv", id);
    return (fs::path(dir) / buf).string();
}

std::vector<FeatureSet> load_class_dir(const std::string& dir, const std::string& prefix) {
    if (!fs::is_directory(dir)) throw io_error(dir + ": not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind(prefix + "_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".fnp") {
            paths.push_back(entry.path().string());
        }
    }
    if (paths.empty()) throw io_error(dir + ": no " + prefix + "_*.fnp files found");
    std::sort(paths.begin(), paths.end());
    std::vector<FeatureSet> sets;
    sets.reserve(paths.size());
    for (const std::string& p : paths) sets.push_back(load_features(p));
    std::sort(sets.begin(), sets.end(),
              [](const FeatureSet& a, const FeatureSet& b) { return a.class_id < b.class_id; });
    for (std::size_t i = 1; i < sets.size(); ++i) {
        if (sets[i].class_id == sets[i - 1].class_id) {
            throw io_error(dir + ": duplicate class id " + std::to_string(sets[i].class_id));
        }
    }
    return sets;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error(dir + ": cannot create output directory: " + ec.message());
}

CleanerConfig cleaner_from_config(const Config& cfg) {
    CleanerConfig cc;
    const std::string loss = cfg.str("loss");
    if (loss == "simnoipro") {
        cc.loss = LossKind::simnoipro;
    } else if (loss == "binary") {
        cc.loss = LossKind::binary_baseline;
    } else if (loss == "simnoipro-min") {
        cc.loss = LossKind::simnoipro_minimize;
    } else {
        throw config_error("unknown loss '" + loss + "' (expected simnoipro|binary|simnoipro-min)");
    }
    const std::string grouping = cfg.str("grouping");
    if (grouping == "windows") {
        cc.grouping = NoiseGrouping::relevance_windows;
    } else if (grouping == "kmeans") {
        cc.grouping = NoiseGrouping::feature_kmeans;
    } else {
        throw config_error("unknown grouping '" + grouping + "' (expected windows|kmeans)");
    }
    const std::string alpha = cfg.str("alpha-schedule");
    if (alpha == "increasing") {
        cc.alpha_schedule = AlphaSchedule::increasing;
    } else if (alpha == "equal") {
        cc.alpha_schedule = AlphaSchedule::equal;
    } else if (alpha == "decreasing") {
        cc.alpha_schedule = AlphaSchedule::decreasing;
    } else {
        throw config_error("unknown alpha-schedule '" + alpha +
                           "' (expected increasing|equal|decreasing)");
    }
    cc.windows = static_cast<std::size_t>(cfg.unsigned_integer("windows"));
    cc.alpha_lo = cfg.number("alpha-lo");
    cc.alpha_hi = cfg.number("alpha-hi");
    cc.beta = cfg.number("beta");
    cc.lambda = cfg.number("lambda");
    cc.iterations = static_cast<std::size_t>(cfg.unsigned_integer("iterations"));
    cc.lr = LrSchedule::step(cfg.number("lr"), cfg.number("lr-decay-factor"),
                             static_cast<std::size_t>(cfg.unsigned_integer("lr-decay-period")),
                             cc.iterations);
    cc.weight_decay = cfg.number("weight-decay");
    cc.hidden_dim = static_cast<std::size_t>(cfg.unsigned_integer("hidden-dim"));
    cc.seed = cfg.unsigned_integer("seed");
    cc.validate();
    return cc;
}

TrainBatchSpec train_spec_from_config(const Config& cfg) {
    TrainBatchSpec spec;
    spec.batch_size = static_cast<std::size_t>(cfg.unsigned_integer("batch-size"));
    spec.epochs = static_cast<std::size_t>(cfg.unsigned_integer("epochs"));
    spec.lr = LrSchedule::cosine(cfg.number("clf-lr"), cfg.number("clf-lr-final"), spec.epochs);
    spec.weight_decay = cfg.number("clf-weight-decay");
    spec.seed = cfg.unsigned_integer("seed");
    spec.validate();
    return spec;
}

PipelineOptions pipeline_from_config(const Config& cfg) {
    PipelineOptions opts;
    opts.scorer = parse_scorer(cfg.str("scorer"));
    opts.prototype_nn = cfg.known("prototype-nn") && cfg.boolean("prototype-nn");
    opts.cleaner = cleaner_from_config(cfg);
    opts.beta_weight = cfg.number("beta-weight");
    opts.k_neighbors = static_cast<std::size_t>(cfg.unsigned_integer("k-neighbors"));
    if (cfg.known("temperature")) opts.temperature = cfg.number("temperature");
    if (cfg.known("batch-size")) opts.train = train_spec_from_config(cfg);
    opts.workers = static_cast<std::size_t>(cfg.unsigned_integer("workers"));
    opts.seed = cfg.unsigned_integer("seed");
    return opts;
}

nlohmann::json shot_summary_json(const ShotSummary& s) {
    nlohmann::json trials = nlohmann::json::array();
    for (std::size_t t = 0; t < s.trials.size(); ++t) {
        trials.push_back(
            {{"trial", t}, {"top1", s.trials[t].top1}, {"top5", s.trials[t].top5}});
    }
    return {{"shot", s.shot},        {"trials", trials},
            {"top1_mean", s.top1_mean}, {"top1_std", s.top1_std},
            {"top5_mean", s.top5_mean}, {"top5_std", s.top5_std},
            {"std_kind", "sample"}};
}

Matrix prototypes_to_matrix(const HybridPrototypes& hp, std::size_t dim) {
    // Column layout: p_clean | p_noise_global | p_unified | per-group sums.
    Matrix out(dim, 3 + hp.windows.group_count());
    std::copy(hp.clean.begin(), hp.clean.end(), out.col(0));
    std::copy(hp.noise_global.begin(), hp.noise_global.end(), out.col(1));
    std::copy(hp.unified.begin(), hp.unified.end(), out.col(2));
    for (std::size_t t = 0; t < hp.windows.group_count(); ++t) {
        std::copy_n(hp.windows.protos.col(t), dim, out.col(3 + t));
    }
    return out;
}

}  // namespace

std::vector<KeySpec> schema_for(const std::string& command) {
    if (command == "synth") return merge({kCommon, kSynthKeys});
    if (command == "clean") return merge({kCommon, kCleanKeys});
    if (command == "protos") {
        return merge({kCommon, kCleanKeys, {{"scores", "", "directory of scores_*.csv files"}}});
    }
    if (command == "train") {
        return merge({kCommon,
                      kCleanKeys,
                      kClassifierKeys,
                      {{"scores", "", "directory of scores_*.csv files"},
                       {"protos", "", "directory of protos_*.fnp files"}}});
    }
    if (command == "eval") return merge({kCommon, kCleanKeys, kClassifierKeys, kEvalKeys});
    if (command == "sweep") {
        return merge({kCommon,
                      kCleanKeys,
                      kClassifierKeys,
                      kEvalKeys,
                      {{"alpha-grid", "", "comma-separated alpha-hi grid values"},
                       {"beta-grid", "", "comma-separated beta grid values"},
                       {"step-grid", "false", "use the 19-value step-rule grid on both axes"},
                       {"sweep-trials", "1", "trials per grid cell"}}});
    }
    if (command == "hist") {
        return merge({kCommon,
                      {{"scores", "", "scores CSV to histogram"},
                       {"bins", "10", "number of equal-width bins"}}});
    }
    throw config_error("unknown command '" + command + "'");
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"synth", "clean", "protos", "train",
                                                   "eval",  "sweep", "hist"};
    return names;
}

void cmd_synth(const Config& cfg) {
    SynthSpec spec;
    spec.classes = static_cast<std::size_t>(cfg.unsigned_integer("classes"));
    spec.dim = static_cast<std::size_t>(cfg.unsigned_integer("dim"));
    spec.clean_per_class = static_cast<std::size_t>(cfg.unsigned_integer("clean-per-class"));
    spec.noisy_per_class = static_cast<std::size_t>(cfg.unsigned_integer("noisy-per-class"));
    spec.relevant_fraction = cfg.number("relevant-fraction");
    spec.sigma_in = cfg.number("sigma-in");
    spec.sigma_out = cfg.number("sigma-out");
    spec.queries_per_class = static_cast<std::size_t>(cfg.unsigned_integer("queries-per-class"));
    spec.seed = cfg.unsigned_integer("seed");
    spec.validate();

    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);
    ManifestWriter manifest("synth", cfg);
    manifest.stage_begin("synthesize");
    const SynthData data = synthesize(spec);
    manifest.stage_end("synthesize");

    manifest.stage_begin("write");
    for (const FeatureSet& fs_train : data.train) {
        const std::string path = class_file(out_dir, "class", fs_train.class_id);
        save_features(path, fs_train);
        manifest.add_output(path);
    }
    for (const FeatureSet& q : data.queries) {
        const std::string path = class_file(out_dir, "queries", q.class_id);
        save_features(path, q);
        manifest.add_output(path);
    }
    manifest.stage_end("write");
    manifest.set_metrics({{"classes", data.train.size()},
                          {"examples_per_class", data.train.empty() ? 0 : data.train[0].count()}});
    manifest.write((fs::path(out_dir) / "manifest_synth.json").string());
}

void cmd_clean(const Config& cfg) {
    if (!cfg.has("features")) throw config_error("clean: --features directory is required");
    const PipelineOptions opts = pipeline_from_config(cfg);
    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);

    ManifestWriter manifest("clean", cfg);
    const std::vector<FeatureSet> sets = load_class_dir(cfg.str("features"), "class");
    for (const FeatureSet& fs_class : sets) {
        manifest.add_input(class_file(cfg.str("features"), "class", fs_class.class_id));
    }

    manifest.stage_begin("clean");
    std::vector<RelevanceScores> all_scores(sets.size());
    std::vector<std::vector<TraceRow>> all_traces(sets.size());
    std::vector<std::size_t> clamp_counts(sets.size(), 0);
    parallel_for(sets.size(), opts.workers, [&](std::size_t slot) {
        const FeatureSet& fs_class = sets[slot];
        const std::uint64_t seed = derive_seed(opts.seed, 0, fs_class.class_id);
        if (opts.scorer == Scorer::gcn) {
            if (opts.k_neighbors >= fs_class.count()) {
                throw config_error("k-neighbors must be below the class example count");
            }
            const AffinityGraph graph =
                normalize_adjacency(build_affinity(fs_class, opts.k_neighbors));
            CleanerConfig cc = opts.cleaner;
            cc.seed = seed;
            CleanResult res = train_cleaner(fs_class, graph, cc);
            all_scores[slot] = std::move(res.scores);
            all_traces[slot] = std::move(res.trace);
            clamp_counts[slot] = res.log_clamp_count;
        } else {
            all_scores[slot] = score_class(fs_class, opts, seed);
        }
    });
    manifest.stage_end("clean");
    for (std::size_t slot = 0; slot < sets.size(); ++slot) {
        if (clamp_counts[slot] > 0) {
            std::fprintf(stderr,
                         "warning: class %u: %zu saturated scores clamped before the log\n",
                         sets[slot].class_id, clamp_counts[slot]);
        }
    }

    manifest.stage_begin("write");
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t slot = 0; slot < sets.size(); ++slot) {
        const std::uint32_t id = sets[slot].class_id;
        const std::string spath = scores_file(out_dir, id);
        save_scores_csv(spath, all_scores[slot]);
        manifest.add_output(spath);
        nlohmann::json row = {{"class", id},
                              {"mean_clean_r", all_scores[slot].mean_clean()},
                              {"mean_noisy_r", all_scores[slot].mean_noisy()}};
        if (!all_traces[slot].empty()) {
            const std::string tpath = trace_file(out_dir, id);
            save_trace_csv(tpath, all_traces[slot]);
            manifest.add_output(tpath);
            row["final_loss"] = all_traces[slot].back().loss;
            row["log_clamps"] = clamp_counts[slot];
        }
        per_class.push_back(std::move(row));
    }
    manifest.stage_end("write");
    manifest.set_metrics({{"classes", sets.size()}, {"per_class", per_class}});
    manifest.write((fs::path(out_dir) / "manifest_clean.json").string());
}

void cmd_protos(const Config& cfg) {
    if (!cfg.has("features")) throw config_error("protos: --features directory is required");
    if (!cfg.has("scores")) throw config_error("protos: --scores directory is required");
    const PipelineOptions opts = pipeline_from_config(cfg);
    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);

    ManifestWriter manifest("protos", cfg);
    const std::vector<FeatureSet> sets = load_class_dir(cfg.str("features"), "class");

    manifest.stage_begin("prototypes");
    double max_decomposition_gap = 0.0;
    for (const FeatureSet& fs_class : sets) {
        const std::string spath = scores_file(cfg.str("scores"), fs_class.class_id);
        manifest.add_input(spath);
        RelevanceScores scores = load_scores_csv(spath);
        if (scores.size() != fs_class.count() || scores.clean_count != fs_class.clean_count) {
            throw config_error("protos: scores for class " + std::to_string(fs_class.class_id) +
                               " do not match the feature file");
        }
        const std::uint64_t seed = derive_seed(opts.seed, 0, fs_class.class_id);
        const HybridPrototypes hp = class_prototypes(fs_class, scores, opts, seed);
        for (std::size_t i = 0; i < hp.unified.size(); ++i) {
            max_decomposition_gap = std::max(
                max_decomposition_gap,
                std::fabs(hp.unified[i] - hp.clean[i] - hp.noise_global[i]));
        }
        FeatureSet out;
        out.class_id = fs_class.class_id;
        out.features = prototypes_to_matrix(hp, fs_class.dim());
        out.clean_count = out.features.cols();
        const std::string ppath = class_file(out_dir, "protos", fs_class.class_id);
        save_features(ppath, out);
        manifest.add_output(ppath);
    }
    manifest.stage_end("prototypes");
    manifest.set_metrics({{"classes", sets.size()},
                          {"max_decomposition_gap", max_decomposition_gap}});
    manifest.write((fs::path(out_dir) / "manifest_protos.json").string());
}

void cmd_train(const Config& cfg) {
    for (const char* key : {"features", "scores", "protos"}) {
        if (!cfg.has(key)) {
            throw config_error(std::string("train: --") + key + " is required");
        }
    }
    const PipelineOptions opts = pipeline_from_config(cfg);
    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);

    ManifestWriter manifest("train", cfg);
    const std::vector<FeatureSet> sets = load_class_dir(cfg.str("features"), "class");
    if (sets.size() < 2) throw config_error("train: need at least 2 classes");

    std::vector<RelevanceScores> scores;
    Matrix prototypes(sets.front().dim(), sets.size());
    std::vector<std::uint32_t> class_ids;
    for (std::size_t slot = 0; slot < sets.size(); ++slot) {
        const std::string spath = scores_file(cfg.str("scores"), sets[slot].class_id);
        const std::string ppath = class_file(cfg.str("protos"), "protos", sets[slot].class_id);
        manifest.add_input(spath);
        manifest.add_input(ppath);
        scores.push_back(load_scores_csv(spath));
        const FeatureSet protos = load_features(ppath);
        if (protos.dim() != sets[slot].dim() || protos.count() < 3) {
            throw config_error("train: malformed prototype file for class " +
                               std::to_string(sets[slot].class_id));
        }
        std::copy_n(protos.features.col(2), protos.dim(), prototypes.col(slot));
        class_ids.push_back(sets[slot].class_id);
    }

    manifest.stage_begin("train");
    CosineClassifier clf = init_from_prototypes(prototypes, class_ids, opts.temperature);
    TrainBatchSpec spec = opts.train;
    spec.seed = derive_seed(opts.seed, 0, 0xC1F5);
    const TrainResult result = train_classifier(clf, sets, scores, spec);
    manifest.stage_end("train");

    FeatureSet weights;
    weights.class_id = 0;
    weights.features = result.clf.weights;
    weights.clean_count = result.clf.weights.cols();
    const std::string wpath = (fs::path(out_dir) / "classifier.fnp").string();
    save_features(wpath, weights);
    manifest.add_output(wpath);

    nlohmann::json meta = {{"temperature", result.clf.temperature},
                           {"class_ids", result.clf.class_ids},
                           {"dim", result.clf.dim()}};
    const std::string mpath = (fs::path(out_dir) / "classifier.json").string();
    write_json_atomic(mpath, meta);
    manifest.add_output(mpath);

    manifest.set_metrics({{"initial_loss", result.initial_loss},
                          {"final_loss", result.epoch_loss.back()}});
    manifest.write((fs::path(out_dir) / "manifest_train.json").string());
}

void cmd_eval(const Config& cfg) {
    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);
    ManifestWriter manifest("eval", cfg);

    if (!cfg.has("queries")) throw config_error("eval: --queries directory is required");
    const std::vector<FeatureSet> queries = load_class_dir(cfg.str("queries"), "queries");

    nlohmann::json metrics;
    if (cfg.has("classifier")) {
        manifest.add_input(cfg.str("classifier"));
        const FeatureSet weights = load_features(cfg.str("classifier"));
        const std::string meta_path =
            (fs::path(cfg.str("classifier")).parent_path() / "classifier.json").string();
        manifest.add_input(meta_path);
        const nlohmann::json meta = load_json(meta_path);
        CosineClassifier clf;
        clf.weights = weights.features;
        clf.temperature = meta.at("temperature").get<double>();
        clf.class_ids = meta.at("class_ids").get<std::vector<std::uint32_t>>();
        manifest.stage_begin("evaluate");
        const TrialResult r = evaluate_classifier(clf, queries);
        manifest.stage_end("evaluate");
        metrics = {{"mode", "classifier"}, {"top1", r.top1}, {"top5", r.top5}};
    } else if (cfg.has("protos")) {
        const std::vector<FeatureSet> protos = load_class_dir(cfg.str("protos"), "protos");
        Matrix prototype_matrix(protos.front().dim(), protos.size());
        std::vector<std::uint32_t> ids;
        for (std::size_t slot = 0; slot < protos.size(); ++slot) {
            manifest.add_input(class_file(cfg.str("protos"), "protos", protos[slot].class_id));
            std::copy_n(protos[slot].features.col(2), protos[slot].dim(),
                        prototype_matrix.col(slot));
            ids.push_back(protos[slot].class_id);
        }
        const CosineClassifier clf =
            init_from_prototypes(prototype_matrix, ids, cfg.number("temperature"));
        manifest.stage_begin("evaluate");
        const TrialResult r = evaluate_classifier(clf, queries);
        manifest.stage_end("evaluate");
        metrics = {{"mode", "prototypes"}, {"top1", r.top1}, {"top5", r.top5}};
    } else {
        if (!cfg.has("features")) {
            throw config_error("eval: --features is required for pipeline evaluation");
        }
        const std::vector<FeatureSet> pool = load_class_dir(cfg.str("features"), "class");
        for (const FeatureSet& fs_class : pool) {
            manifest.add_input(class_file(cfg.str("features"), "class", fs_class.class_id));
        }
        const PipelineOptions opts = pipeline_from_config(cfg);
        const std::vector<double> shot_list = cfg.number_list("shots");
        if (shot_list.empty()) throw config_error("eval: --shots must list at least one shot");
        const std::size_t trials = static_cast<std::size_t>(cfg.unsigned_integer("trials"));

        manifest.stage_begin("pipeline");
        nlohmann::json shots = nlohmann::json::array();
        for (double shot_value : shot_list) {
            if (shot_value < 1.0 || shot_value != std::floor(shot_value)) {
                throw config_error("eval: shots must be positive integers");
            }
            const ShotSummary summary = evaluate_shot(
                pool, queries, opts, static_cast<std::size_t>(shot_value), trials);
            shots.push_back(shot_summary_json(summary));
        }
        manifest.stage_end("pipeline");
        metrics = {{"mode", "pipeline"}, {"shots", shots}};
    }

    const std::string mpath = (fs::path(out_dir) / "metrics.json").string();
    write_json_atomic(mpath, metrics);
    manifest.add_output(mpath);
    manifest.set_metrics(metrics);
    manifest.write((fs::path(out_dir) / "manifest_eval.json").string());
}

std::vector<double> sweep_grid_values() {
    std::vector<double> values;
    for (int i = 1; i <= 10; ++i) values.push_back(0.01 * i);
    for (int i = 2; i <= 10; ++i) values.push_back(0.1 * i);
    return values;
}

void cmd_sweep(const Config& cfg) {
    if (!cfg.has("features")) throw config_error("sweep: --features directory is required");
    if (!cfg.has("queries")) throw config_error("sweep: --queries directory is required");
    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);

    std::vector<double> alpha_grid, beta_grid;
    if (cfg.boolean("step-grid")) {
        alpha_grid = sweep_grid_values();
        beta_grid = sweep_grid_values();
    } else {
        alpha_grid = cfg.number_list("alpha-grid");
        beta_grid = cfg.number_list("beta-grid");
    }
    if (alpha_grid.empty() || beta_grid.empty()) {
        throw config_error("sweep: the grid is empty; pass --alpha-grid/--beta-grid or --step-grid");
    }
    for (double v : alpha_grid) {
        if (v < 0.01 || v > 1.0) throw config_error("sweep: alpha grid values must be in [0.01, 1]");
    }
    for (double v : beta_grid) {
        if (v < 0.01 || v > 1.0) throw config_error("sweep: beta grid values must be in [0.01, 1]");
    }

    ManifestWriter manifest("sweep", cfg);
    const std::vector<FeatureSet> pool = load_class_dir(cfg.str("features"), "class");
    const std::vector<FeatureSet> queries = load_class_dir(cfg.str("queries"), "queries");
    const PipelineOptions base = pipeline_from_config(cfg);
    const std::size_t trials = static_cast<std::size_t>(cfg.unsigned_integer("sweep-trials"));
    const std::size_t shot = static_cast<std::size_t>(cfg.number_list("shots").front());

    struct SweepRow {
        double alpha;
        double beta;
        double top1;
        double top5;
    };
    std::vector<SweepRow> rows;
    manifest.stage_begin("sweep");
    for (double alpha : alpha_grid) {
        for (double beta : beta_grid) {
            PipelineOptions opts = base;
            // The grid value pins the high endpoint; the low endpoint keeps
            // the default 0.2/1.0 ratio. The equal schedule uses it directly.
            opts.cleaner.alpha_hi = alpha;
            opts.cleaner.alpha_lo = 0.2 * alpha;
            opts.cleaner.beta = beta;
            opts.prototype_nn = true;
            const ShotSummary summary = evaluate_shot(pool, queries, opts, shot, trials);
            rows.push_back({alpha, beta, summary.top1_mean, summary.top5_mean});
        }
    }
    manifest.stage_end("sweep");

    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.top5 != b.top5) return a.top5 > b.top5;
        if (a.alpha != b.alpha) return a.alpha < b.alpha;
        return a.beta < b.beta;
    });

    const std::string csv_path = (fs::path(out_dir) / "sweep.csv").string();
    {
        std::ofstream out(csv_path, std::ios::trunc);
        if (!out) throw io_error(csv_path + ": cannot open for writing");
        out << "alpha,beta,top1,top5\n";
        char buf[160];
        for (const SweepRow& row : rows) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", row.alpha, row.beta,
                          row.top1, row.top5);
            out << buf;
        }
    }
    manifest.add_output(csv_path);
    manifest.set_metrics({{"cells", rows.size()},
                          {"best_alpha", rows.front().alpha},
                          {"best_beta", rows.front().beta},
                          {"best_top5", rows.front().top5}});
    manifest.write((fs::path(out_dir) / "manifest_sweep.json").string());
}

void cmd_hist(const Config& cfg) {
    if (!cfg.has("scores")) throw config_error("hist: --scores file is required");
    const std::size_t bins = static_cast<std::size_t>(cfg.unsigned_integer("bins"));
    if (bins == 0) throw config_error("hist: bins must be >= 1");
    const std::string out_dir = cfg.str("out-dir");
    ensure_out_dir(out_dir);

    ManifestWriter manifest("hist", cfg);
    manifest.add_input(cfg.str("scores"));
    const RelevanceScores scores = load_scores_csv(cfg.str("scores"));
    if (scores.noisy_count() == 0) throw config_error("hist: no noisy scores to bin");

    const WindowPartition partition = window_partition(scores, bins);
    std::vector<std::size_t> counts(bins, 0);
    for (std::size_t w : partition.assignment) counts[w] += 1;

    const std::string csv_path = (fs::path(out_dir) / "hist.csv").string();
    {
        std::ofstream out(csv_path, std::ios::trunc);
        if (!out) throw io_error(csv_path + ": cannot open for writing");
        out << "bin_lower,bin_upper,count\n";
        char buf[128];
        for (std::size_t t = 0; t < bins; ++t) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", partition.spec.lower(t),
                          partition.spec.upper(t), counts[t]);
            out << buf;
        }
    }
    manifest.add_output(csv_path);
    manifest.set_metrics({{"bins", bins}, {"noisy_scores", scores.noisy_count()}});
    manifest.write((fs::path(out_dir) / "manifest_hist.json").string());
}

void run_command(const std::string& name, const Config& cfg) {
    if (name == "synth") return cmd_synth(cfg);
    if (name == "clean") return cmd_clean(cfg);
    if (name == "protos") return cmd_protos(cfg);
    if (name == "train") return cmd_train(cfg);
    if (name == "eval") return cmd_eval(cfg);
    if (name == "sweep") return cmd_sweep(cfg);
    if (name == "hist") return cmd_hist(cfg);
    throw config_error("unknown command '" + name + "'");
}

}  // namespace noiseproto::cli
