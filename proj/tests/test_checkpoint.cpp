#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "fixtures.hpp"
#include "vrec/checkpoint.hpp"

namespace vrec {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

class CheckpointTest : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() / ("vrec_ckpt_" + std::to_string(::getpid()));
  void SetUp() override { fs::create_directories(dir); }
  void TearDown() override { fs::remove_all(dir); }
};

TEST_F(CheckpointTest, RoundTripIsByteIdentical) {
  auto t = testing::TinyComposite::make();
  t.perturb(0.1);
  save_checkpoint(dir / "a.ckpt", &t.backbone, &t.bank);
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  ASSERT_TRUE(loaded.backbone && loaded.bank);
  save_checkpoint(dir / "b.ckpt", &*loaded.backbone, &*loaded.bank);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  EXPECT_EQ(slurp(dir / "a.ckpt").substr(0, 9), "VRECCKPT1");
  const auto pa = t.parameters();
  auto pb = loaded.backbone->parameters();
  for (auto& x : loaded.bank->parameters()) pb.push_back(x);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].to_vector(), pb[i].to_vector());
}

TEST_F(CheckpointTest, LoadedModelGivesSameScores) {
  auto t = testing::TinyComposite::make();
  save_checkpoint(dir / "a.ckpt", &t.backbone, &t.bank);
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  const auto x = run_reasoning(t.backbone, &t.bank, t.sample.history, 2);
  const auto y = run_reasoning(*loaded.backbone, &*loaded.bank, t.sample.history, 2);
  EXPECT_EQ(recommendation_scores(t.backbone, x).to_vector(),
            recommendation_scores(*loaded.backbone, y).to_vector());
}

TEST_F(CheckpointTest, BackboneOnly) {
  auto t = testing::TinyComposite::make();
  save_checkpoint(dir / "a.ckpt", &t.backbone, nullptr);
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  EXPECT_TRUE(loaded.backbone.has_value());
  EXPECT_FALSE(loaded.bank.has_value());
}

TEST_F(CheckpointTest, Errors) {
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);
  auto t = testing::TinyComposite::make();
  save_checkpoint(dir / "a.ckpt", &t.backbone, &t.bank);
  auto bytes = slurp(dir / "a.ckpt");

  dump(dir / "magic.ckpt", "NOTACKPT1" + bytes.substr(9));
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), std::runtime_error);

  dump(dir / "short.ckpt", bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), std::runtime_error);

  // Same-length edit of the first recorded shape.
  const auto pos = bytes.find("\"shape\":[");
  ASSERT_NE(pos, std::string::npos);
  auto tampered = bytes;
  char& digit = tampered[pos + 9];
  digit = digit == '9' ? '8' : static_cast<char>(digit + 1);
  dump(dir / "shape.ckpt", tampered);
  try {
    load_checkpoint(dir / "shape.ckpt");
    FAIL() << "shape mismatch not detected";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace vrec
