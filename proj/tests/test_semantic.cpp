#include "hcsg/semantic.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

namespace hcsg {
namespace {

TrackHistory track_at_speed(double speed, int frames = 6) {
  TrackHistory t;
  t.dt = kDefaultDt;
  for (int i = 0; i < frames; ++i) {
    t.positions.push_back({2.0 + speed * t.dt * i, 1.0});
    t.keypoints.push_back(KeypointFrame{});
  }
  return t;
}

std::uint64_t reference_fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TEST(RuleBased, StationaryTrack) {
  const InterpreterConfig cfg;
  EXPECT_EQ(rule_based_description(track_at_speed(0.0), "sorting clothes", cfg),
            "A person is sorting clothes, standing still.");
}

TEST(RuleBased, MotionClauses) {
  const InterpreterConfig cfg;
  EXPECT_EQ(motion_clause(0.05, cfg), "standing still");
  EXPECT_EQ(motion_clause(0.5, cfg), "walking slowly");
  EXPECT_EQ(motion_clause(1.0, cfg), "walking quickly");
  const ActivityDescription d = interpret(track_at_speed(1.0), "having a discussion", cfg);
  EXPECT_EQ(d.source, DescriptionSource::kRule);
  EXPECT_NE(d.text.find("walking quickly"), std::string::npos);
}

TEST(RuleBased, TrackSpeedIsNetDisplacementOverTime) {
  EXPECT_NEAR(track_speed(track_at_speed(0.6)), 0.6, 1e-12);
  TrackHistory there_and_back = track_at_speed(0.0, 3);
  there_and_back.positions[1].x += 0.5;
  EXPECT_NEAR(track_speed(there_and_back), 0.0, 1e-12);
}

TEST(Remote, UnreachableEndpointFallsBack) {
  InterpreterConfig cfg;
  cfg.kind = InterpreterKind::kRemote;
  cfg.endpoint = "http://127.0.0.1:9/describe";
  cfg.timeout_s = 0.5;
  const ActivityDescription d = interpret(track_at_speed(0.0), "sorting clothes", cfg);
  EXPECT_EQ(d.source, DescriptionSource::kFallback);
  EXPECT_EQ(d.text, "A person is sorting clothes, standing still.");
}

TEST(Remote, ConfigValidation) {
  InterpreterConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.kind = InterpreterKind::kRemote;
  cfg.endpoint = "not a url";
  EXPECT_THROW(cfg.validate(), Error);
  cfg.endpoint = "http://localhost:8080/v1/describe";
  EXPECT_NO_THROW(cfg.validate());
}

class FakeInterpreter : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/ok", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      res.set_content(R"({"description": "A person is on the phone."})", "application/json");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text": 3})", "application/json");
    });
    server_.Post("/error", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  InterpreterConfig config(const std::string& path) const {
    InterpreterConfig cfg;
    cfg.kind = InterpreterKind::kRemote;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port_) + path;
    cfg.timeout_s = 2.0;
    return cfg;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string last_body_;
};

TEST_F(FakeInterpreter, SuccessfulResponse) {
  const ActivityDescription d = interpret(track_at_speed(0.3), "talking on the phone", config("/ok"));
  EXPECT_EQ(d.source, DescriptionSource::kRemote);
  EXPECT_EQ(d.text, "A person is on the phone.");
  const auto body = nlohmann::json::parse(last_body_);
  ASSERT_TRUE(body.contains("track"));
  ASSERT_TRUE(body.contains("prompt"));
  EXPECT_EQ(body["track"].size(), 6u);
  EXPECT_EQ(last_body_.find("talking on the phone"), std::string::npos);
}

TEST_F(FakeInterpreter, MalformedAndErrorResponsesFallBack) {
  for (const char* path : {"/bad", "/error", "/missing"}) {
    const ActivityDescription d = interpret(track_at_speed(0.0), "reading", config(path));
    EXPECT_EQ(d.source, DescriptionSource::kFallback) << path;
    EXPECT_EQ(d.text, "A person is reading, standing still.");
  }
}

TEST(EncodeText, EmptyIsZero) {
  EXPECT_EQ(encode_text(""), Eigen::VectorXd::Zero(kSemFeatureDim));
  EXPECT_EQ(encode_text("  ,.! "), Eigen::VectorXd::Zero(kSemFeatureDim));
}

TEST(EncodeText, SingleTokenHitsItsBucket) {
  const Eigen::VectorXd v = encode_text("Walk");
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(kSemFeatureDim);
  expect[static_cast<Eigen::Index>(reference_fnv1a("walk") % 128)] = 1.0;
  EXPECT_EQ(v, expect);
  EXPECT_EQ(encode_text("walk walk"), v);
}

TEST(EncodeText, Deterministic) {
  const std::string s = "A person is sorting clothes, standing still.";
  EXPECT_EQ(encode_text(s), encode_text(s));
}

TEST(EncodeText, BagOfTokens) {
  EXPECT_EQ(encode_text("person walking slowly near door"), encode_text("door near slowly walking person"));
  EXPECT_EQ(encode_text("A-B c"), encode_text("c b a"));
}

TEST(EncodeText, UnitNorm) {
  Rng rng(4);
  const std::vector<std::string> words = {"person", "walking", "phone", "box", "door", "still", "a", "is"};
  for (int i = 0; i < 100; ++i) {
    std::string s;
    for (int k = rng.uniform_int(1, 12); k > 0; --k) s += words[static_cast<std::size_t>(rng.uniform_int(0, 7))] + " ";
    EXPECT_NEAR(encode_text(s).norm(), 1.0, 1e-9);
  }
}

TEST(EncodeText, MatchesReferenceCounts) {
  const std::string s = "Person person box";
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(kSemFeatureDim);
  expect[static_cast<Eigen::Index>(reference_fnv1a("person") % 128)] += 2.0;
  expect[static_cast<Eigen::Index>(reference_fnv1a("box") % 128)] += 1.0;
  expect.normalize();
  EXPECT_LT((encode_text(s) - expect).norm(), 1e-15);
}

TEST(Tokenize, LowercaseAlphanumericRuns) {
  EXPECT_EQ(tokenize("Hello, World-42!"), (std::vector<std::string>{"hello", "world", "42"}));
}

}  // namespace
}  // namespace hcsg
