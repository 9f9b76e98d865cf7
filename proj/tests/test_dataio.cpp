#include <doctest.h>

#include <cmath>
#include <fstream>

#include "noiseproto/dataio.hpp"
#include "noiseproto/error.hpp"
#include "noiseproto/scores.hpp"
#include "test_helpers.hpp"

using namespace noiseproto;

TEST_CASE("feature container round trips bit-exactly") {
    testutil::Rng rng(31);
    testutil::TempDir dir("container");
    for (int round = 0; round < 15; ++round) {
        const std::size_t d = 1 + rng.index(12);
        const std::size_t n = 2 + rng.index(9);
        FeatureSet fs = testutil::random_class(rng, d, n, 1 + rng.index(n - 1));
        fs.class_id = static_cast<std::uint32_t>(rng.index(1000));
        if (rng.uniform() < 0.5) {
            fs.planted_relevant.resize(fs.noisy_count());
            for (auto& f : fs.planted_relevant) f = rng.uniform() < 0.5 ? 1 : 0;
        }
        const std::string path = dir.file("roundtrip.fnp");
        save_features(path, fs);
        const FeatureSet back = load_features(path);
        CHECK(back.class_id == fs.class_id);
        CHECK(back.clean_count == fs.clean_count);
        CHECK(back.features.rows() == fs.features.rows());
        CHECK(back.features.cols() == fs.features.cols());
        for (std::size_t i = 0; i < fs.features.size(); ++i) {
            CHECK(back.features.data()[i] == fs.features.data()[i]);
        }
        CHECK(back.planted_relevant == fs.planted_relevant);
    }
}

TEST_CASE("bad magic is a format error at offset 0") {
    testutil::TempDir dir("magic");
    const std::string path = dir.file("bad.fnp");
    std::ofstream(path) << "NOPE this is not a container";
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("offset 0"), io_error);
}

TEST_CASE("empty file is a format error at offset 0") {
    testutil::TempDir dir("empty");
    const std::string path = dir.file("empty.fnp");
    std::ofstream{path};
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("offset 0"), io_error);
}

TEST_CASE("truncated payload reports the failing offset") {
    testutil::Rng rng(33);
    testutil::TempDir dir("trunc");
    const std::string path = dir.file("full.fnp");
    FeatureSet fs = testutil::random_class(rng, 4, 5, 2);
    save_features(path, fs);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() / 2);
    const std::string cut = dir.file("cut.fnp");
    std::ofstream(cut, std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(load_features(cut), doctest::Contains("truncated"), io_error);
}

TEST_CASE("absurd header dimensions are rejected as overflow") {
    testutil::TempDir dir("overflow");
    const std::string path = dir.file("huge.fnp");
    std::string header = "FNP1";
    auto put_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) header.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put_u32(1);           // version
    put_u32(0xFFFFFFFF);  // d
    put_u32(0xFFFFFFFF);  // N
    put_u32(1);           // k
    put_u32(0);           // class id
    header.push_back('\0');
    std::ofstream(path, std::ios::binary) << header;
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("overflow"), io_error);
}

TEST_CASE("csv interchange preserves features and clean markers") {
    testutil::Rng rng(35);
    testutil::TempDir dir("csv");
    std::vector<FeatureSet> sets;
    for (std::uint32_t c = 0; c < 3; ++c) {
        FeatureSet fs = testutil::random_class(rng, 6, 8, 3);
        fs.class_id = c * 7;
        sets.push_back(std::move(fs));
    }
    const std::string path = dir.file("features.csv");
    save_features_csv(path, sets);
    const std::vector<FeatureSet> back = load_features_csv(path);
    REQUIRE(back.size() == sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
        CHECK(back[s].class_id == sets[s].class_id);
        CHECK(back[s].clean_count == sets[s].clean_count);
        for (std::size_t i = 0; i < sets[s].features.size(); ++i) {
            CHECK(back[s].features.data()[i] == sets[s].features.data()[i]);
        }
    }
}

TEST_CASE("relevant fraction one flags every noisy example") {
    SynthSpec spec;
    spec.classes = 2;
    spec.noisy_per_class = 20;
    spec.relevant_fraction = 1.0;
    spec.queries_per_class = 0;
    const SynthData data = synthesize(spec);
    for (const FeatureSet& fs : data.train) {
        for (std::uint8_t f : fs.planted_relevant) CHECK(f == 1);
    }
}

TEST_CASE("pure distractors are nearly orthogonal to the class center on average") {
    SynthSpec spec;
    spec.classes = 1;
    spec.dim = 64;
    spec.clean_per_class = 1;
    spec.noisy_per_class = 500;
    spec.relevant_fraction = 0.0;
    spec.sigma_out = 3.0;
    spec.queries_per_class = 0;
    const SynthData data = synthesize(spec);
    const FeatureSet& fs = data.train.front();
    // The lone clean feature doubles as a center estimate.
    const auto center = fs.features.col_span(0);
    double mean_cos = 0.0;
    for (std::size_t j = 1; j < fs.count(); ++j) {
        const auto v = fs.features.col_span(j);
        mean_cos += dot(center, v) / (l2_norm(center) * l2_norm(v));
    }
    mean_cos /= static_cast<double>(fs.count() - 1);
    CHECK(std::fabs(mean_cos) < 0.1);
}

TEST_CASE("synthesis is deterministic in the seed") {
    SynthSpec spec;
    spec.classes = 2;
    spec.noisy_per_class = 10;
    spec.queries_per_class = 4;
    const SynthData a = synthesize(spec);
    const SynthData b = synthesize(spec);
    for (std::size_t c = 0; c < a.train.size(); ++c) {
        for (std::size_t i = 0; i < a.train[c].features.size(); ++i) {
            CHECK(a.train[c].features.data()[i] == b.train[c].features.data()[i]);
        }
        for (std::size_t i = 0; i < a.queries[c].features.size(); ++i) {
            CHECK(a.queries[c].features.data()[i] == b.queries[c].features.data()[i]);
        }
    }
}

TEST_CASE("relevant noisy features sit closer to the center than distractors") {
    double margin_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthSpec spec;
        spec.classes = 1;
        spec.seed = seed;
        spec.queries_per_class = 0;
        const SynthData data = synthesize(spec);
        const FeatureSet& fs = data.train.front();
        Vec center(fs.dim(), 0.0);
        for (std::size_t j = 0; j < fs.clean_count; ++j) axpy(1.0, fs.features.col_span(j), center);
        double relevant_cos = 0.0, distractor_cos = 0.0;
        std::size_t n_rel = 0, n_dis = 0;
        const double cn = l2_norm(center);
        for (std::size_t j = 0; j < fs.noisy_count(); ++j) {
            const auto v = fs.features.col_span(fs.clean_count + j);
            const double cosine = dot(center, v) / (cn * l2_norm(v));
            if (fs.planted_relevant[j]) {
                relevant_cos += cosine;
                ++n_rel;
            } else {
                distractor_cos += cosine;
                ++n_dis;
            }
        }
        margin_sum += relevant_cos / n_rel - distractor_cos / n_dis;
    }
    CHECK(margin_sum / 10.0 > 0.3);
}

TEST_CASE("sampling the full pool returns it in order") {
    testutil::Rng rng(37);
    FeatureSet fs = testutil::random_class(rng, 4, 9, 5);
    fs.class_id = 3;
    const auto episode = sample_trial({fs}, 5, 123);
    REQUIRE(episode.size() == 1);
    CHECK(episode[0].clean_count == 5);
    CHECK(episode[0].count() == 9);
    for (std::size_t i = 0; i < fs.features.size(); ++i) {
        CHECK(episode[0].features.data()[i] == fs.features.data()[i]);
    }
}

TEST_CASE("consecutive trials draw different subsets from a larger pool") {
    testutil::Rng rng(39);
    FeatureSet fs = testutil::random_class(rng, 4, 30, 20);
    TrialSpec spec;
    spec.shot = 5;
    spec.trials = 2;
    spec.seed = 7;
    const auto trials = sample_trials({fs}, spec);
    bool different = false;
    for (std::size_t i = 0; i < 4 * 5; ++i) {
        if (trials[0][0].features.data()[i] != trials[1][0].features.data()[i]) {
            different = true;
            break;
        }
    }
    CHECK(different);
}

TEST_CASE("re-running a trial reproduces it exactly") {
    testutil::Rng rng(41);
    FeatureSet fs = testutil::random_class(rng, 5, 20, 12);
    const auto a = sample_trial({fs}, 4, 100 + 3);
    const auto b = sample_trial({fs}, 4, 100 + 3);
    for (std::size_t i = 0; i < a[0].features.size(); ++i) {
        CHECK(a[0].features.data()[i] == b[0].features.data()[i]);
    }
}

TEST_CASE("insufficient clean pool names the class") {
    testutil::Rng rng(43);
    FeatureSet fs = testutil::random_class(rng, 4, 6, 2);
    fs.class_id = 77;
    CHECK_THROWS_WITH_AS(sample_trial({fs}, 3, 0), doctest::Contains("77"), config_error);
}

TEST_CASE("scores csv round trips") {
    testutil::Rng rng(45);
    testutil::TempDir dir("scores");
    const RelevanceScores scores = testutil::random_scores(rng, 12, 4);
    const std::string path = dir.file("scores.csv");
    save_scores_csv(path, scores);
    const RelevanceScores back = load_scores_csv(path);
    CHECK(back.clean_count == scores.clean_count);
    REQUIRE(back.values.size() == scores.values.size());
    for (std::size_t i = 0; i < scores.values.size(); ++i) {
        CHECK(back.values[i] == scores.values[i]);
    }
}
