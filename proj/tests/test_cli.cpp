#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "peak/cli.hpp"
#include "peak/config.hpp"
#include "peak/error.hpp"
#include "peak/io_util.hpp"
#include "peak/topic_model.hpp"

#include <httplib.h>

namespace fs = std::filesystem;
using namespace peak;

namespace {

const fs::path kData = PEAK_DATA_DIR;

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run peak_cmd(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_work" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string synthetic_ini() { return (kData / "synthetic.ini").string(); }

}  // namespace

TEST_CASE("config file overrides defaults and resolves relative paths") {
  const fs::path dir = fresh_dir("config");
  write(dir / "a.ini",
        "[paths]\ncorpus = sub/c.jsonl\nmodel_dir = /abs/model\n"
        "[nmf]\nk = 7\n[coherence]\nk = 3 5\n[delegation]\nstats_mode = true\ntheta = 0.6\n"
        "[categorizer]\nweak_text = opposing\n");
  const PipelineConfig defaults;
  const PipelineConfig cfg = load_config(dir / "a.ini");
  CHECK(cfg.paths.corpus == dir / "sub/c.jsonl");
  CHECK(cfg.paths.model_dir == fs::path("/abs/model"));
  CHECK(cfg.nmf.k == 7);
  CHECK(cfg.coherence_k == std::vector<std::size_t>{3, 5});
  CHECK(cfg.stats_mode == StatsMode::kTrueClass);
  CHECK(cfg.qualification.theta == doctest::Approx(0.6));
  CHECK(cfg.weak_style == WeakTextStyle::kOpposing);
  CHECK(cfg.min_df == defaults.min_df);
  CHECK(cfg.forest.n_trees == defaults.forest.n_trees);
}

TEST_CASE("config rejects unknown keys, bad values and missing files") {
  const fs::path dir = fresh_dir("config_bad");
  write(dir / "key.ini", "[nmf]\nkay = 3\n");
  write(dir / "section.ini", "[nfm]\nk = 3\n");
  write(dir / "frac.ini", "[split]\ntest_fraction = 1\n");
  write(dir / "num.ini", "[forest]\nn_trees = many\n");
  CHECK_THROWS_WITH_AS(load_config(dir / "key.ini"), doctest::Contains("kay"), UsageError);
  CHECK_THROWS_AS(load_config(dir / "section.ini"), UsageError);
  CHECK_THROWS_AS(load_config(dir / "frac.ini"), UsageError);
  CHECK_THROWS_AS(load_config(dir / "num.ini"), UsageError);
  CHECK_THROWS_AS(load_config(dir / "absent.ini"), IoError);
}

TEST_CASE("flags beat the config file") {
  const fs::path dir = fresh_dir("precedence");
  write(dir / "p.ini", "[paths]\ncorpus = " + (kData / "synthetic_corpus.jsonl").string() +
                           "\nmodel_dir = model\n[nmf]\nk = 3\nmax_iter = 40\n");
  const std::string ini = (dir / "p.ini").string();
  REQUIRE(peak_cmd({"--config", ini, "ingest"}).status == 0);
  REQUIRE(peak_cmd({"--config", ini, "fit-topics"}).status == 0);
  CHECK(TopicModel::from_json(read_file(dir / "model/topic_model.json")).k() == 3);
  REQUIRE(peak_cmd({"--config", ini, "fit-topics", "--k", "5"}).status == 0);
  CHECK(TopicModel::from_json(read_file(dir / "model/topic_model.json")).k() == 5);
  const fs::path other = dir / "other";
  REQUIRE(peak_cmd({"--config", ini, "--model-dir", other.string(), "ingest"}).status == 0);
  CHECK(fs::exists(other / "corpus.jsonl"));
}

TEST_CASE("exit codes") {
  const fs::path dir = fresh_dir("exit");
  CHECK(peak_cmd({}).status == 1);
  const Run bogus = peak_cmd({"bogus"});
  CHECK(bogus.status == 1);
  CHECK(bogus.err.find("bogus") != std::string::npos);
  CHECK(peak_cmd({"--help"}).status == 0);
  CHECK(peak_cmd({"fit-topics", "--k", "notanumber"}).status == 1);
  CHECK(peak_cmd({"simulate", "--theta", "1.5", "--model-dir", dir.string()}).status == 1);

  const Run missing = peak_cmd({"--model-dir", dir.string(), "train"});
  CHECK(missing.status == 3);
  CHECK(missing.err.find("run `peak ingest` first") != std::string::npos);
  CHECK(peak_cmd({"--model-dir", dir.string(), "ingest", "--input", (dir / "nope.jsonl").string()})
            .status == 3);

  write(dir / "broken.jsonl", "{\"id\": \"a\", \"tags\": [\"x\"], \"label\": \"secret\"}\n");
  const Run bad = peak_cmd({"--model-dir", dir.string(), "ingest", "--input", (dir / "broken.jsonl").string()});
  CHECK(bad.status == 2);
  CHECK(bad.err.find("secret") != std::string::npos);
}

TEST_CASE("full pipeline on the bundled corpus") {
  const fs::path model = fresh_dir("pipeline") / "model";
  const std::vector<std::string> base = {"--config", synthetic_ini(), "--model-dir", model.string()};
  auto step = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    const Run r = peak_cmd(args);
    INFO(r.err);
    REQUIRE(r.status == 0);
    return r;
  };
  CHECK(step({"ingest"}).out.find("ingested 300 images") == 0);
  const Run fit = step({"fit-topics"});
  CHECK(fit.out.find("fit_log monotone") != std::string::npos);
  const TopicModel tm = TopicModel::from_json(read_file(model / "topic_model.json"));
  CHECK(tm.k() == 8);
  for (std::size_t i = 1; i < tm.fit_log.size(); ++i)
    CHECK(tm.fit_log[i] <= tm.fit_log[i - 1] + 1e-10 * tm.fit_log[i - 1]);

  CHECK(step({"train", "--n-trees", "20"}).out.find("trained 20 trees") == 0);
  const auto metrics = nlohmann::json::parse(read_file(model / "metrics.json"));
  CHECK(metrics.contains("accuracy"));

  const Run explain = step({"explain", "img_0007"});
  std::istringstream lines(explain.out);
  std::string first, second, third;
  std::getline(lines, first);
  std::getline(lines, second);
  std::getline(lines, third);
  CHECK(first.rfind("prediction: ", 0) == 0);
  CHECK(second.rfind("category: ", 0) == 0);
  CHECK(!third.empty());
  CHECK(fs::exists(model / "cards/img_0007.svg"));

  CHECK(step({"categorize"}).out.find("explained 300 images") == 0);
  CHECK(step({"render"}).out.find("rendered 300 cards") == 0);
  CHECK(fs::exists(model / "gallery.html"));
  CHECK(step({"simulate"}).out.find("qualified pairs:") == 0);
  const auto delegation = nlohmann::json::parse(read_file(model / "delegation.json"));
  CHECK(delegation["total"] == 60);
  step({"stats"});
  CHECK(fs::exists(model / "stats.json"));

  const Run unknown = peak_cmd({"--config", synthetic_ini(), "--model-dir", model.string(), "explain", "img_9999"});
  CHECK(unknown.status == 2);
}

TEST_CASE("tag-fetch fills untagged images through the service") {
  httplib::Server server;
  server.Post("/v1/tag", [](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Authorization") != "Bearer cli-token") {
      res.status = 401;
      return;
    }
    const auto ref = nlohmann::json::parse(req.body)["image"].get<std::string>();
    nlohmann::json body = {{"concepts", {{{"name", "Seen " + ref}, {"value", 0.9}}, {{"name", "Dog"}, {"value", 0.5}}}}};
    res.set_content(body.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const fs::path dir = fresh_dir("tag_fetch");
  write(dir / "in.jsonl",
        "{\"id\": \"a\", \"image\": \"a.jpg\", \"label\": \"public\"}\n"
        "{\"id\": \"b\", \"tags\": [\"cat\"], \"label\": \"private\"}\n"
        "{\"id\": \"c\", \"image\": \"c.jpg\", \"label\": \"private\"}\n");
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/tag";
  const std::vector<std::string> args = {"--model-dir", dir.string(), "tag-fetch", "--input",
                                         (dir / "in.jsonl").string(), "--output",
                                         (dir / "out.jsonl").string(), "--endpoint", endpoint};
  setenv("PEAK_TAGGER_TOKEN", "cli-token", 1);
  const Run ok = peak_cmd(args);
  INFO(ok.err);
  CHECK(ok.status == 0);
  CHECK(ok.out.find("tagged 2 of 3 images") == 0);
  std::istringstream lines(read_file(dir / "out.jsonl"));
  std::vector<nlohmann::json> recs;
  for (std::string line; std::getline(lines, line);) recs.push_back(nlohmann::json::parse(line));
  REQUIRE(recs.size() == 3);
  CHECK(recs[0]["tags"] == nlohmann::json({"seen a.jpg", "dog"}));
  CHECK(recs[1]["tags"] == nlohmann::json({"cat"}));
  CHECK(recs[2]["tags"][0] == "seen c.jpg");

  setenv("PEAK_TAGGER_TOKEN", "wrong-token", 1);
  const Run denied = peak_cmd(args);
  CHECK(denied.status == 3);
  CHECK(denied.err.find("PEAK_TAGGER_TOKEN") != std::string::npos);
  CHECK(denied.err.find("wrong-token") == std::string::npos);
  unsetenv("PEAK_TAGGER_TOKEN");

  server.stop();
  thread.join();
}
