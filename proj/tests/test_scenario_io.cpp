#include "hcsg/scenario_io.hpp"

#include <filesystem>
#include <functional>

#include <gtest/gtest.h>

#include "hcsg/benchmark.hpp"

namespace hcsg {
namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(ScenarioIo, RoundTripIsExact) {
  for (Split split : {Split::kSeen, Split::kUnseen}) {
    const auto eps = generate_benchmark(10, split, 4);
    const auto j = benchmark_to_json(eps);
    const auto back = benchmark_from_json(nlohmann::json::parse(j.dump()));
    ASSERT_EQ(back.size(), eps.size());
    EXPECT_EQ(benchmark_to_json(back).dump(), j.dump());
    EXPECT_EQ(benchmark_hash(back), benchmark_hash(eps));
    for (std::size_t i = 0; i < eps.size(); ++i) {
      EXPECT_EQ(back[i].id, eps[i].id);
      EXPECT_EQ(back[i].start, eps[i].start);
      EXPECT_EQ(back[i].goal, eps[i].goal);
      EXPECT_EQ(back[i].instruction.text, eps[i].instruction.text);
      EXPECT_EQ(back[i].pedestrians.size(), eps[i].pedestrians.size());
      EXPECT_EQ(back[i].seed, eps[i].seed);
    }
  }
}

TEST(ScenarioIo, FileRoundTrip) {
  const auto eps = generate_benchmark(3, Split::kSeen, 8);
  const auto path = std::filesystem::temp_directory_path() / "hcsg_scenario_io_test.json";
  save_benchmark(path, eps);
  EXPECT_EQ(benchmark_hash(load_benchmark(path)), benchmark_hash(eps));
  std::filesystem::remove(path);
}

TEST(ScenarioIo, UnknownFieldsRejected) {
  const auto eps = generate_benchmark(2, Split::kSeen, 8);
  nlohmann::json j = nlohmann::json::parse(benchmark_to_json(eps).dump());

  nlohmann::json top = j;
  top["extra"] = 1;
  EXPECT_EQ(kind_of([&] { benchmark_from_json(top); }), ErrorKind::kInvalidScenario);

  nlohmann::json ep = j;
  ep["episodes"][0]["reward"] = 3;
  EXPECT_EQ(kind_of([&] { benchmark_from_json(ep); }), ErrorKind::kInvalidScenario);

  nlohmann::json ped = j;
  ped["episodes"][1]["pedestrians"][0]["mood"] = "cheerful";
  EXPECT_EQ(kind_of([&] { benchmark_from_json(ped); }), ErrorKind::kInvalidScenario);
}

TEST(ScenarioIo, MissingAndMalformedFieldsRejected) {
  const auto eps = generate_benchmark(1, Split::kUnseen, 8);
  const nlohmann::json j = nlohmann::json::parse(benchmark_to_json(eps).dump());

  nlohmann::json no_goal = j;
  no_goal["episodes"][0].erase("goal");
  EXPECT_EQ(kind_of([&] { benchmark_from_json(no_goal); }), ErrorKind::kInvalidScenario);

  nlohmann::json bad_version = j;
  bad_version["version"] = 99;
  EXPECT_EQ(kind_of([&] { benchmark_from_json(bad_version); }), ErrorKind::kInvalidScenario);

  nlohmann::json bad_map = j;
  bad_map["episodes"][0]["map"] = "no-such-map";
  EXPECT_EQ(kind_of([&] { benchmark_from_json(bad_map); }), ErrorKind::kInvalidScenario);

  nlohmann::json bad_goal = j;
  bad_goal["episodes"][0]["goal"] = {"x", 1};
  EXPECT_EQ(kind_of([&] { benchmark_from_json(bad_goal); }), ErrorKind::kInvalidScenario);

  nlohmann::json wrong_text = j;
  wrong_text["episodes"][0]["instruction"]["text"] = "Go somewhere else.";
  EXPECT_EQ(kind_of([&] { benchmark_from_json(wrong_text); }), ErrorKind::kInvalidScenario);
}

TEST(ScenarioIo, MissingFileIsAnIoError) {
  EXPECT_THROW(load_benchmark("/nonexistent/dir/bench.json"), Error);
}

}  // namespace
}  // namespace hcsg
