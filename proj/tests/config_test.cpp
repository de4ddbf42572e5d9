#include <gtest/gtest.h>

#include "pathkernel/config.hpp"
#include "pathkernel/error.hpp"
#include "test_util.hpp"

using namespace pathkernel;

namespace {

std::string message_of(std::string_view text) {
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* kMinimal = R"({
  "model": {"kind": "linear", "input_dim": 2},
  "loss": "half_squared_error",
  "data": {"points": [{"x": [1, 0], "y": 1}, {"x": [0, 1], "y": -1, "id": 7}]},
  "train": {"epsilon": 0.1, "steps": 5},
  "seed": 3
})";

}  // namespace

TEST(Config, MinimalLinear) {
    const ExperimentConfig cfg = parse_config(kMinimal);
    EXPECT_EQ(cfg.model, ModelSpec::linear(2));
    EXPECT_EQ(cfg.loss.kind, LossKind::HalfSquaredError);
    EXPECT_FALSE(cfg.reg.active());
    ASSERT_EQ(cfg.data.size(), 2u);
    EXPECT_EQ(cfg.data[0].index, 0);
    EXPECT_EQ(cfg.data[1].index, 7);
    EXPECT_EQ(cfg.train.epsilon, 0.1);
    EXPECT_EQ(cfg.train.steps, 5u);
    EXPECT_EQ(cfg.train.mode, BatchMode::Batch);
    EXPECT_EQ(cfg.seed, 3u);
    EXPECT_EQ(cfg.init, InitScheme::UniformScaled);
}

TEST(Config, FullMlp) {
    const ExperimentConfig cfg = parse_config(R"({
      "model": {"kind": "mlp", "layer_sizes": [1, 4, 1], "activation": "relu", "output_activation": "sigmoid",
                "bias": [true, false]},
      "loss": {"kind": "cross_entropy_prob"},
      "regularizer": {"kind": "l2", "lambda": 0.01},
      "data": {"points": [{"x": [0.5], "y": 1}, {"x": [-0.5], "y": 1}]},
      "train": {"epsilon": 0.01, "steps": 10, "mode": "minibatch", "batch_size": 1, "minibatch_seed": 9,
                "checkpoint_stride": 2, "record_outputs": false, "init": "zero"},
      "queries": {"points": [[0.1], [0.2]]},
      "output_dir": "runs/a"
    })");
    EXPECT_EQ(cfg.model.activation, Activation::ReLU);
    EXPECT_EQ(cfg.model.output_activation, Activation::Sigmoid);
    EXPECT_EQ(cfg.model.bias, (std::vector<bool>{true, false}));
    EXPECT_EQ(cfg.loss.kind, LossKind::CrossEntropyProb);
    EXPECT_EQ(cfg.reg.lambda, 0.01);
    EXPECT_EQ(cfg.train.mode, BatchMode::Minibatch);
    EXPECT_EQ(cfg.train.minibatch_seed, 9u);
    EXPECT_EQ(cfg.train.checkpoint_stride, 2u);
    EXPECT_FALSE(cfg.train.record_outputs);
    EXPECT_EQ(cfg.init, InitScheme::Zero);
    EXPECT_EQ(cfg.queries.size(), 2u);
    EXPECT_EQ(cfg.output_dir, "runs/a");
}

TEST(Config, SyntaxErrorReportsLine) {
    const std::string msg = message_of("{\n  \"model\": {\n  ,\n}");
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Config, SchemaErrorsNameTheField) {
    std::string text = kMinimal;
    EXPECT_NE(message_of(std::string(text).replace(text.find("\"linear\""), 8, "\"conv\"")).find("model.kind"),
              std::string::npos);
    EXPECT_NE(message_of(std::string(text).replace(text.find("0.1"), 3, "-0.1")).find("train.epsilon"),
              std::string::npos);
    const std::string missing = message_of(R"({"model": {"kind": "linear", "input_dim": 2}, "loss": "half_squared_error",
                                              "train": {"epsilon": 0.1, "steps": 1}})");
    EXPECT_NE(missing.find("data"), std::string::npos) << missing;
}

TEST(Config, DimensionMismatchRejected) {
    std::string text = kMinimal;
    text.replace(text.find("[1, 0]"), 6, "[1, 0, 2]");
    EXPECT_NE(message_of(text).find("data point 0"), std::string::npos) << message_of(text);
}

TEST(Config, MinibatchSizeChecked) {
    std::string text = kMinimal;
    text.replace(text.find("\"steps\": 5"), 10, "\"steps\": 5, \"mode\": \"minibatch\", \"batch_size\": 3");
    EXPECT_THROW((void)parse_config(text), ConfigError);
}

TEST(Config, HashDependsOnContent) {
    const ExperimentConfig a = parse_config(kMinimal);
    EXPECT_EQ(a.hash, parse_config(kMinimal).hash);
    std::string text = kMinimal;
    text.replace(text.find("\"y\": 1"), 6, "\"y\": 2");
    EXPECT_NE(a.hash, parse_config(text).hash);
}

TEST(Config, CsvDataAndQueries) {
    const auto dir = fixtures::temp_dir("config_csv");
    fixtures::write_file(dir / "train.csv", "x0,x1,y\n1,2,3\n-1,0.5,0\n");
    fixtures::write_file(dir / "q.csv", "x0,x1\n0.5,0.5\n");
    fixtures::write_file(dir / "cfg.json", R"({"model": {"kind": "linear", "input_dim": 2}, "loss": "half_squared_error",
      "data": {"csv": "train.csv"}, "queries": {"csv": "q.csv"}, "train": {"epsilon": 0.1, "steps": 1}})");
    const ExperimentConfig cfg = load_config(dir / "cfg.json");
    ASSERT_EQ(cfg.data.size(), 2u);
    EXPECT_EQ(cfg.data[1].x, (Vector{-1.0, 0.5}));
    EXPECT_EQ(cfg.data[0].y_star, 3.0);
    EXPECT_EQ(cfg.queries, (std::vector<Vector>{{0.5, 0.5}}));

    fixtures::write_file(dir / "bad.csv", "x0,x1,y\n1,abc,3\n");
    EXPECT_THROW((void)read_dataset_csv(dir / "bad.csv"), ConfigError);
}

TEST(Config, StrictFloatParsing) {
    EXPECT_EQ(parse_float("1e-3"), 1e-3);
    EXPECT_EQ(parse_float_list("1, -2.5,3"), (Vector{1.0, -2.5, 3.0}));
    EXPECT_THROW((void)parse_float("1.0x"), ConfigError);
    EXPECT_THROW((void)parse_float(""), ConfigError);
    EXPECT_THROW((void)parse_float_list("1,,2"), ConfigError);
}

TEST(Config, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}
