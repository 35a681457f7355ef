#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "trg/trg.h"

namespace fs = std::filesystem;

namespace {

const std::string kFixtures = TRG_FIXTURES_DIR;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("trg_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kTinyRun = R"({
  "model": {"c": 8, "c1": 4, "c2": 2, "c3": 4, "heads": 2, "layers": 2, "refine_layers": 2,
            "boundary_stages": 1, "ct": 16},
  "synth": {"sequences": 4, "frames": 40},
  "train": {"epochs": 2, "batch_size": 2}
})";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(trg_version()) > 0);
  CHECK(std::string(trg_status_name(TRG_OK)) == "ok");
  CHECK(std::string(trg_status_name(TRG_ERR_MISMATCH)) == "mismatch");
  CHECK(trg_set_log_level("warn") == TRG_OK);
  CHECK(trg_set_log_level("loud") == TRG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("config handle") {
  trg_config* cfg = nullptr;
  REQUIRE(trg_config_create(&cfg) == TRG_OK);
  char* text = nullptr;
  REQUIRE(trg_config_to_json(cfg, &text) == TRG_OK);
  auto j = nlohmann::json::parse(text);
  trg_string_free(text);
  CHECK(j["model"]["c"] == 64);
  CHECK(j["train"]["batch_size"] == 8);

  CHECK(trg_config_merge_json(cfg, R"({"model": {"c": 32}})") == TRG_OK);
  CHECK(std::string(trg_last_error()).empty());
  CHECK(trg_config_merge_json(cfg, R"({"model": {"width": 32}})") == TRG_ERR_FORMAT);
  CHECK(std::string(trg_last_error()).find("model.width") != std::string::npos);
  REQUIRE(trg_config_to_json(cfg, &text) == TRG_OK);
  CHECK(nlohmann::json::parse(text)["model"]["c"] == 32);
  trg_string_free(text);
  trg_config_free(cfg);

  CHECK(trg_config_load("/nonexistent/run.json", &cfg) == TRG_ERR_IO);
  CHECK(trg_config_create(nullptr) == TRG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("embeddings and graphs") {
  trg_embeddings* e = nullptr;
  REQUIRE(trg_embeddings_load((kFixtures + "/embeddings/pku_joints.trge").c_str(), &e) == TRG_OK);
  std::size_t rows = 0, cols = 0;
  REQUIRE(trg_embeddings_shape(e, &rows, &cols) == TRG_OK);
  CHECK(rows == 25);
  CHECK(cols == 768);

  trg_graph* g = nullptr;
  REQUIRE(trg_graph_build(e, nullptr, nullptr, &g) == TRG_OK);
  std::size_t n = 0;
  REQUIRE(trg_graph_size(g, &n) == TRG_OK);
  CHECK(n == 25);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0;
    REQUIRE(trg_graph_value(g, i, i, &d) == TRG_OK);
    CHECK(d == doctest::Approx(1.0));
    for (std::size_t k = 0; k < n; ++k) {
      double a = 0, b = 0;
      trg_graph_value(g, i, k, &a);
      trg_graph_value(g, k, i, &b);
      CHECK(std::abs(a - b) <= 1e-9);
    }
  }
  double dummy;
  CHECK(trg_graph_value(g, 25, 0, &dummy) == TRG_ERR_INVALID_ARGUMENT);
  const char* label = nullptr;
  REQUIRE(trg_graph_label(g, 0, &label) == TRG_OK);
  CHECK(std::strlen(label) > 0);

  const auto dir = scratch("graph");
  CHECK(trg_graph_save(g, (dir / "g.json").string().c_str()) == TRG_OK);
  CHECK(fs::exists(dir / "g.json"));
  trg_graph_free(g);

  CHECK(trg_graph_build(e, "chebyshev", nullptr, &g) == TRG_ERR_INVALID_ARGUMENT);
  trg_embeddings_free(e);
  CHECK(trg_embeddings_load("/nonexistent.trge", &e) == TRG_ERR_IO);
}

TEST_CASE("metrics through the C interface") {
  const int gt[] = {0, 0, 1, 1, 2, 2};
  const int pred[] = {0, 0, 1, 1, 1, 2};
  trg_metrics m{};
  REQUIRE(trg_metrics_compute(gt, gt, 6, -1, &m) == TRG_OK);
  CHECK(m.acc == 100.0);
  CHECK(m.edit == 100.0);
  CHECK(m.f1_50 == 100.0);
  REQUIRE(trg_metrics_compute(pred, gt, 6, -1, &m) == TRG_OK);
  CHECK(m.acc == doctest::Approx(100.0 * 5 / 6));
  CHECK(trg_metrics_compute(pred, gt, 0, -1, &m) == TRG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("synth, train, evaluate, augment, score") {
  const auto dir = scratch("run");
  trg_config* cfg = nullptr;
  REQUIRE(trg_config_create(&cfg) == TRG_OK);
  REQUIRE(trg_config_merge_json(cfg, kTinyRun) == TRG_OK);

  // synthesis needs a topology
  CHECK(trg_synth_generate(cfg, (dir / "data").string().c_str()) == TRG_ERR_INVALID_ARGUMENT);
  const nlohmann::json paths = {{"data",
                                 {{"topology", kFixtures + "/topologies/synth8.json"},
                                  {"joint_embeddings", kFixtures + "/embeddings/synth8_joints.trge"},
                                  {"action_embeddings", (dir / "data" / "actions.trge").string()},
                                  {"train_dir", (dir / "data").string()},
                                  {"out_dir", (dir / "out").string()}}}};
  REQUIRE(trg_config_merge_json(cfg, paths.dump().c_str()) == TRG_OK);
  REQUIRE(trg_synth_generate(cfg, (dir / "data").string().c_str()) == TRG_OK);
  CHECK(fs::exists(dir / "data" / "actions.json"));
  CHECK(fs::exists(dir / "data" / "actions.trge"));
  CHECK(fs::exists(dir / "data" / "actions.labels.json"));

  char* ckpt = nullptr;
  REQUIRE(trg_train(cfg, &ckpt) == TRG_OK);
  CHECK(fs::exists(ckpt));
  trg_metrics m{};
  REQUIRE(trg_evaluate(ckpt, (dir / "data").string().c_str(), (dir / "pred").string().c_str(), 1, &m) == TRG_OK);
  CHECK(m.acc >= 0.0);
  CHECK(m.acc <= 100.0);

  trg_metrics rescored{};
  REQUIRE(trg_score_dirs((dir / "pred").string().c_str(), (dir / "data").string().c_str(), -1, &rescored) == TRG_OK);
  CHECK(rescored.acc == doctest::Approx(m.acc));
  CHECK(rescored.edit == doctest::Approx(m.edit));

  REQUIRE(trg_augment_dataset((dir / "data").string().c_str(), (dir / "aug").string().c_str(), 0.5, 0.5, 3) == TRG_OK);
  std::ifstream manifest(dir / "aug" / "augment.json");
  const auto j = nlohmann::json::parse(manifest);
  CHECK(j["applied"].size() == 4);
  int occluded = 0, rotated = 0;
  for (const auto& [_, v] : j["applied"].items()) {
    occluded += v == "occlusion";
    rotated += v == "rotation";
  }
  CHECK(occluded == 2);
  CHECK(rotated == 2);

  // a checkpoint against a dataset on another skeleton
  trg_config* other = nullptr;
  REQUIRE(trg_config_create(&other) == TRG_OK);
  REQUIRE(trg_config_merge_json(other, kTinyRun) == TRG_OK);
  const nlohmann::json lara = {{"data", {{"topology", kFixtures + "/topologies/lara19.json"}}}};
  REQUIRE(trg_config_merge_json(other, lara.dump().c_str()) == TRG_OK);
  REQUIRE(trg_synth_generate(other, (dir / "lara").string().c_str()) == TRG_OK);
  CHECK(trg_evaluate(ckpt, (dir / "lara").string().c_str(), nullptr, 1, &m) == TRG_ERR_MISMATCH);
  CHECK(std::string(trg_last_error()).find("joints") != std::string::npos);

  trg_string_free(ckpt);
  trg_config_free(other);
  trg_config_free(cfg);
}
