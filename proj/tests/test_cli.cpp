#include "support.hpp"

#include "clearfield/errors.hpp"
#include "clearfield/workflows.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace clearfield;
using nlohmann::json;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CLEARFIELD_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// A toy scene small enough to train in well under a second.
const fs::path& small_toy() {
  static const fs::path dir = [] {
    const fs::path d = testsupport::scratch_dir("cli_toy");
    ToySceneOptions o;
    o.width = 32;
    o.height = 32;
    o.train_views = 4;
    o.test_views = 2;
    o.grid = 16;
    o.supersample = 1;
    o.samples_per_ray = 32;
    cmd_gen_toy(d, o);
    return d;
  }();
  return dir;
}

fs::path small_config(const fs::path& dir) {
  const json j = {{"train",
                   {{"resolution", 8}, {"coarse_epochs", 1}, {"fine_epochs", 1}, {"batch_rays", 512}, {"samples_per_ray", 16}}},
                  {"quadtree", {{"mu", 0.5}, {"min_area", 64}}},
                  {"metrics", {{"samples_per_ray", 16}}}};
  std::ofstream(dir / "small.json") << j.dump(2);
  return dir / "small.json";
}

}  // namespace

TEST_SUITE("run configuration") {
  TEST_CASE("defaults are complete and valid") {
    const RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.guidance_or_null().has_value());
    CHECK(cfg.quadtree_or_null().has_value());
    CHECK(cfg.k == 3);
    CHECK(cfg.strategy == "identity");
    const RunConfig back = run_config_from_json(run_config_to_json(cfg));
    CHECK(run_config_to_json(back) == run_config_to_json(cfg));
  }

  TEST_CASE("flags override the file, the file overrides defaults") {
    const fs::path dir = testsupport::scratch_dir("cli_merge");
    std::ofstream(dir / "c.json") << R"({"_comment": "ignored", "seed": 5, "train": {"coarse_epochs": 4, "fine_epochs": 7},
                                      "guidance": {"s": 3}})";
    const RunConfig cfg = merge_run_config(dir / "c.json", json{{"train", {{"fine_epochs", 2}}}});
    CHECK(cfg.seed == 5);
    CHECK(cfg.train.seed == 5);
    CHECK(cfg.train.coarse_epochs == 4);
    CHECK(cfg.train.fine_epochs == 2);
    CHECK(cfg.guidance.s == 3);
    CHECK(cfg.train.batch_rays == TrainConfig{}.batch_rays);
    const RunConfig only_flags = merge_run_config(std::nullopt, json{{"seed", 9}});
    CHECK(only_flags.seed == 9);
  }

  TEST_CASE("sigma and covariance both set the pattern") {
    const RunConfig a = run_config_from_json(json{{"guidance", {{"sigma", 0.5}}}});
    CHECK(a.guidance.covariance(0, 0) == doctest::Approx(0.25));
    const RunConfig b = run_config_from_json(json{{"guidance", {{"cov", {{0.2, 0.05}, {0.05, 0.1}}}}}});
    CHECK(b.guidance.covariance(1, 0) == 0.05);
    const RunConfig c = run_config_from_json(json{{"train", {{"resolution", {8, 9, 10}}}}});
    CHECK(c.train.resolution == Eigen::Vector3i(8, 9, 10));
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(run_config_from_json(json{{"sede", 1}}), ValidationError);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"epochs", 1}}}}), ValidationError);
    CHECK_THROWS_AS(run_config_from_json(json{{"guidance", {{"loss", "huber"}}}}), ValidationError);
    CHECK_THROWS_AS(run_config_from_json(json{{"train", {{"batch_rays", "many"}}}}), ValidationError);
    const fs::path dir = testsupport::scratch_dir("cli_bad");
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK_THROWS_AS(merge_run_config(dir / "broken.json", json::object()), ValidationError);
  }

  TEST_CASE("quadtree without guidance is a configuration error") {
    RunConfig cfg;
    cfg.guidance_enabled = false;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.quadtree_enabled = false;
    CHECK_NOTHROW(cfg.validate());
    CHECK_FALSE(cfg.guidance_or_null().has_value());
  }
}

TEST_CASE("ablation tables round-trip") {
  AblationTable t;
  t.rows.push_back({"no-guidance/no-quadtree", false, false, 23.5, 0.81, 1000, 600, 1.5});
  t.rows.push_back({"guidance/quadtree", true, true, 24.25, 0.83, 2000, 900, 2.25});
  const AblationTable back = AblationTable::from_json(json::parse(t.to_json().dump()));
  CHECK(back == t);
  const std::string md = t.to_markdown();
  CHECK(md.find("guidance/quadtree") != std::string::npos);
  CHECK(md.find("24.25") != std::string::npos);
  CHECK_THROWS_AS(AblationTable::from_json(json{{"rows", {{{"name", 1}}}}}), ValidationError);
}

TEST_SUITE("command line") {
  TEST_CASE("every subcommand has help") {
    const fs::path dir = testsupport::scratch_dir("cli_help");
    for (const char* sub : {"gen-toy", "degrade", "make-triplets", "restore", "train", "render", "eval",
                            "viz-quadtree", "pipeline", "ablate"}) {
      CAPTURE(sub);
      CHECK(run(std::string(sub) + " --help", dir / "help.txt") == 0);
      const std::string text = slurp(dir / "help.txt");
      CHECK(text.find("--out") != std::string::npos);
      CHECK(text.find("--seed") != std::string::npos);
    }
    CHECK(run("", dir / "none.txt") != 0);
    CHECK(run("frobnicate", dir / "none.txt") != 0);
  }

  TEST_CASE("guidance off with quadtree on exits with a validation error") {
    const fs::path dir = testsupport::scratch_dir("cli_invalid");
    const int code = run("pipeline --scene " + (small_toy() / "transforms_train.json").string() +
                             " --guidance off --quadtree on --out " + (dir / "run").string(),
                         dir / "log.txt");
    CHECK(code == 2);
    CHECK(slurp(dir / "log.txt").find("stage 'config'") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "run" / "field.bin"));
  }

  TEST_CASE("missing inputs fail cleanly") {
    const fs::path dir = testsupport::scratch_dir("cli_missing");
    CHECK(run("eval --field " + (dir / "nope.bin").string() + " --scene x.json", dir / "log.txt") != 0);
    std::ofstream(dir / "bad.json") << "{}";
    CHECK(run("degrade --scene " + (dir / "bad.json").string() + " --out " + (dir / "d").string(), dir / "log.txt") != 0);
  }

  TEST_CASE("the individual stages chain together") {
    const fs::path dir = testsupport::scratch_dir("cli_stages");
    const std::string train_manifest = (small_toy() / "transforms_train.json").string();
    const std::string test_manifest = (small_toy() / "transforms_test.json").string();
    const fs::path cfg = small_config(dir);

    REQUIRE(run("degrade --scene " + train_manifest + " --seed 3 --out " + (dir / "deg").string(), dir / "log.txt") == 0);
    CHECK(fs::exists(dir / "deg" / "transforms.json"));
    CHECK(read_json(dir / "deg" / "theta.json")["seed"] == 3);

    REQUIRE(run("restore --scene " + (dir / "deg" / "transforms.json").string() + " --out " + (dir / "res").string(),
                dir / "log.txt") == 0);
    REQUIRE(fs::exists(dir / "res" / "transforms.json"));

    REQUIRE(run("train --scene " + (dir / "res" / "transforms.json").string() + " --config " + cfg.string() +
                    " --seed 3 --out " + (dir / "field.bin").string(),
                dir / "log.txt") == 0);
    CHECK(fs::exists(dir / "field.bin"));
    std::ifstream log(dir / "train_log.jsonl");
    int lines = 0;
    for (std::string line; std::getline(log, line); ++lines) {
      const json e = json::parse(line);
      CHECK(e.contains("loss"));
      CHECK(e.contains("rays_used"));
      CHECK(e.contains("seconds"));
    }
    CHECK(lines == 2);

    REQUIRE(run("render --field " + (dir / "field.bin").string() + " --scene " + test_manifest + " --pose 1 --out " +
                    (dir / "view.png").string() + " --samples-per-ray 16",
                dir / "log.txt") == 0);
    const ImageBuffer img = load_image(dir / "view.png");
    CHECK(img.width() == 32);

    REQUIRE(run("eval --field " + (dir / "field.bin").string() + " --scene " + test_manifest + " --out " +
                    (dir / "report.json").string() + " --samples-per-ray 16",
                dir / "log.txt") == 0);
    const json report = read_json(dir / "report.json");
    CHECK(report["views"].size() == 2);
    CHECK(report["mean_psnr"].get<double>() > 5.0);

    REQUIRE(fs::exists(dir / "tree_state.json"));
    REQUIRE(run("viz-quadtree --scene " + (dir / "res" / "transforms.json").string() + " --tree-state " +
                    (dir / "tree_state.json").string() + " --out " + (dir / "viz").string(),
                dir / "log.txt") == 0);
    CHECK(fs::exists(dir / "viz" / "view_000.png"));
    CHECK(fs::exists(dir / "viz" / "view_003.png"));
  }

  TEST_CASE("pipeline writes a summary of existing artifacts") {
    const fs::path dir = testsupport::scratch_dir("cli_pipeline");
    REQUIRE(run("pipeline --scene " + (small_toy() / "transforms_train.json").string() + " --config " +
                    small_config(dir).string() + " --seed 2 --deterministic --out " + (dir / "run").string(),
                dir / "log.txt") == 0);
    const json summary = read_json(dir / "run" / "summary.json");
    REQUIRE(summary.contains("artifacts"));
    for (const auto& [name, path] : summary["artifacts"].items()) {
      CAPTURE(name);
      CHECK(fs::exists(fs::path(path.get<std::string>())));
    }
    for (const char* f : {"theta.json", "field.bin", "report.json", "config.json"}) CHECK(fs::exists(dir / "run" / f));
    CHECK(read_json(dir / "run" / "report.json")["train_seconds"].is_null());
  }

  TEST_CASE("ablation emits four populated rows") {
    const fs::path dir = testsupport::scratch_dir("cli_ablate");
    RunConfig cfg = merge_run_config(small_config(dir), json{{"scene", (small_toy() / "transforms_train.json").string()},
                                                             {"seed", 4},
                                                             {"out", (dir / "abl").string()}});
    const AblationTable t = cmd_ablate(cfg);
    REQUIRE(t.rows.size() == 4);
    for (const AblationRow& r : t.rows) {
      CHECK(r.psnr > 0.0);
      CHECK(r.ssim != 0.0);
      CHECK(r.rays > 0);
      CHECK(r.fine_rays > 0);
    }
    // rows: (off, off), (off, on), (on, off), (on, on)
    CHECK(t.rows[1].fine_rays < t.rows[0].fine_rays);
    CHECK(t.rows[3].fine_rays < t.rows[2].fine_rays);
    CHECK(AblationTable::from_json(read_json(dir / "abl" / "ablation.json")) == t);
    CHECK(fs::exists(dir / "abl" / "ablation.md"));
  }
}
