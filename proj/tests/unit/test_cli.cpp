#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "cli_config.hpp"
#include "commands.hpp"
#include "fixtures.hpp"
#include "somreplay/binary_io.hpp"
#include "somreplay/checkpoint.hpp"
#include "somreplay/container.hpp"
#include "somreplay/error.hpp"
#include "somreplay/image_sheet.hpp"

namespace somreplay::cli {
namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "somreplay");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Last line of stderr parsed as the JSON error record.
nlohmann::json error_record(const CliResult& r) {
  std::istringstream in(r.err);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty() && line.front() == '{') last = line;
  return nlohmann::json::parse(last);
}

std::filesystem::path fixture_dataset(const std::string& name) {
  const auto dir = testing::temp_dir(name);
  const auto path = dir / "clusters.clds";
  export_dataset(testing::cluster_dataset(3, 4, 12, 5, 0.05, 31), path);
  return path;
}

std::vector<std::string> train_args(const std::filesystem::path& data, const std::filesystem::path& out) {
  return {"train", "--dataset", data.string(), "--grid", "4", "--epochs", "2",
          "--seed", "3", "--out", out.string(), "--sheet-format", "pgm"};
}

TEST(ConfigText, ParsesSectionsAndComments) {
  const KeyValues kv = parse_config_text("# comment\n[som]\ngrid = 7\n; other\n\n[run]\nmode=vae-som\n");
  EXPECT_EQ(kv.get("som.grid"), "7");
  EXPECT_EQ(kv.get("run.mode"), "vae-som");
}

TEST(ConfigText, ErrorsNameLineAndKey) {
  try {
    (void)parse_config_text("[som]\ngrid = 7\nbogus = 1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW((void)parse_config_text("grid 7\n"), ConfigError);
}

TEST(ConfigText, AssignmentsAndValueErrors) {
  KeyValues kv;
  parse_assignment("som.sigma=1.5", kv);
  EXPECT_EQ(kv.get("som.sigma"), "1.5");
  EXPECT_THROW(parse_assignment("som.sigma", kv), ConfigError);
  TrainSettings s;
  apply(kv, s);
  EXPECT_EQ(s.run.som.sigma, 1.5);
  KeyValues bad;
  bad.set("som.epochs", "ten");
  EXPECT_THROW(apply(bad, s), ConfigError);
}

TEST(ConfigText, RenderRoundTrips) {
  TrainSettings s;
  s.dataset = "fashion-mnist";
  s.run.mode = RunMode::vae_per_bmu;
  s.run.classes = {3, 1};
  s.run.som.alpha = 0.125;
  s.run.hit_scope = HitScope::run;
  s.run.vae.hidden = {64, 32};
  s.run.replay.selection = UnitSelection::uniform;
  s.repeats = 5;
  const std::string text = render(s);
  TrainSettings back;
  apply(parse_config_text(text), back);
  EXPECT_EQ(render(back), text);
  EXPECT_EQ(back.run.classes, s.run.classes);
  EXPECT_EQ(back.run.vae, s.run.vae);
  for (const std::string& key : known_keys()) EXPECT_NE(text.find(key.substr(key.find('.') + 1)), std::string::npos);
}

TEST(ConfigText, ClassLists) {
  EXPECT_EQ(parse_class_list("0, 2,5"), (std::vector<ClassId>{0, 2, 5}));
  EXPECT_EQ(format_class_list({4, 1}), "4,1");
  EXPECT_THROW(parse_class_list("1,x"), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, exit_usage);
  EXPECT_EQ(invoke({"frobnicate"}).code, exit_usage);
  const CliResult r = invoke({"train", "--dataset", "mnist"});
  EXPECT_EQ(r.code, exit_usage);
}

TEST(Cli, MissingDatasetNamesPath) {
  const auto out = testing::temp_dir("cli_missing");
  const CliResult r = invoke({"train", "--dataset", (out / "nope.clds").string(), "--out", out.string()});
  EXPECT_EQ(r.code, exit_usage);
  const auto j = error_record(r);
  EXPECT_EQ(j["exit_code"], 2);
  EXPECT_NE(j["message"].get<std::string>().find("nope.clds"), std::string::npos);
}

TEST(Cli, TrainWritesArtifactsAndIsDeterministic) {
  const auto data = fixture_dataset("cli_train_data");
  const auto a = testing::temp_dir("cli_train_a");
  const auto b = testing::temp_dir("cli_train_b");
  const CliResult ra = invoke(train_args(data, a));
  ASSERT_EQ(ra.code, exit_ok) << ra.err;
  ASSERT_EQ(invoke(train_args(data, b)).code, exit_ok);
  for (const char* f : {"final.somr", "report.csv", "summary.json", "resolved.cfg", "snapshots/task_00.pgm",
                        "snapshots/task_02.pgm"}) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  EXPECT_NE(ra.out.find("final_accuracy"), std::string::npos);
  const auto bytes = read_file(a / "summary.json");
  const auto summary = nlohmann::json::parse(std::string(bytes.begin(), bytes.end()));
  EXPECT_TRUE(summary["memory_audit"]["passed"].get<bool>());
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto data = fixture_dataset("cli_override_data");
  const auto out = testing::temp_dir("cli_override");
  const auto cfg = out / "in.cfg";
  write_text_file(cfg, "[som]\ngrid = 9\nepochs = 1\nsigma = 0.7\n");
  auto args = train_args(data, out / "run");
  args.insert(args.end(), {"--config", cfg.string(), "--set", "som.sigma=0.8"});
  ASSERT_EQ(invoke(args).code, exit_ok);
  TrainSettings s;
  apply(parse_config_file(out / "run" / "resolved.cfg"), s);
  EXPECT_EQ(s.run.grid_side, 4);
  EXPECT_EQ(s.run.som.epochs, 2);
  EXPECT_EQ(s.run.som.sigma, 0.8);
}

TEST(Cli, EvalInspectGenerate) {
  const auto data = fixture_dataset("cli_eval_data");
  const auto out = testing::temp_dir("cli_eval");
  const CliResult train = invoke(train_args(data, out));
  ASSERT_EQ(train.code, exit_ok) << train.err;
  const std::string ckpt = (out / "final.somr").string();

  const CliResult eval = invoke({"eval", "--checkpoint", ckpt, "--dataset", data.string()});
  ASSERT_EQ(eval.code, exit_ok) << eval.err;
  EXPECT_NE(eval.out.find("accuracy"), std::string::npos);
  EXPECT_NE(eval.out.find("confusion"), std::string::npos);

  const CliResult inspect = invoke({"inspect", "--checkpoint", ckpt});
  ASSERT_EQ(inspect.code, exit_ok) << inspect.err;
  EXPECT_NE(inspect.out.find("total_hits"), std::string::npos);

  const auto sheet = out / "gen.pgm";
  const std::vector<std::string> gen{"generate", "--checkpoint", ckpt, "--class", "1", "--count", "4",
                                     "--seed", "9", "--out", sheet.string()};
  ASSERT_EQ(invoke(gen).code, exit_ok);
  const auto first = read_file(sheet);
  ASSERT_EQ(invoke(gen).code, exit_ok);
  EXPECT_EQ(read_file(sheet), first);
  EXPECT_EQ(read_pnm(sheet).width, 4u * 4u);

  const CliResult unseen =
      invoke({"generate", "--checkpoint", ckpt, "--class", "8", "--out", (out / "x.pgm").string()});
  EXPECT_EQ(unseen.code, exit_usage);
  EXPECT_EQ(invoke({"generate", "--checkpoint", ckpt, "--class", "1", "--count", "0", "--out",
                    (out / "y.pgm").string()})
                .code,
            exit_usage);
}

TEST(Cli, RuntimeErrorsExitOne) {
  const auto dir = testing::temp_dir("cli_runtime");
  testing::write_bytes(dir / "junk.somr", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const CliResult r = invoke({"inspect", "--checkpoint", (dir / "junk.somr").string()});
  EXPECT_EQ(r.code, exit_runtime);
  EXPECT_EQ(error_record(r)["exit_code"], 1);
}

TEST(Cli, DataRootResolution) {
  EXPECT_EQ(resolve_data_root("/x/y"), std::filesystem::path("/x/y"));
  const SomCheckpointMeta gray{SampleSpace::pixel, {1, 28, 28}};
  const SomCheckpointMeta rgb{SampleSpace::latent, {3, 32, 32}};
  EXPECT_EQ(default_range(gray), kUnitRange);
  EXPECT_EQ(default_range(rgb), kSymmetricRange);
}

}  // namespace
}  // namespace somreplay::cli
