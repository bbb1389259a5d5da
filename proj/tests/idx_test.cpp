#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "saleval/idx.hpp"
#include "test_support.hpp"

using namespace saleval;
namespace ts = saleval::testing;

namespace {

std::vector<std::uint8_t> header(std::initializer_list<std::uint32_t> words) {
  std::vector<std::uint8_t> out;
  for (auto w : words)
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(std::uint8_t(w >> shift));
  return out;
}

template <typename F>
ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::IoError;
}

// Independent reader: streams the file through istream::get without the
// library's parsing code.
struct RawIdx {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

RawIdx read_raw(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  auto word = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | std::uint32_t(in.get());
    return v;
  };
  RawIdx r;
  r.magic = word();
  const int ndims = int(r.magic & 0xff);
  for (int i = 0; i < ndims; ++i) r.dims.push_back(word());
  for (int c; (c = in.get()) != EOF;) r.payload.push_back(std::uint8_t(c));
  return r;
}

std::filesystem::path mnist_file(const std::string& stem) {
  auto dotted = stem;
  dotted[stem.find("-idx")] = '.';
  for (const auto& name : {stem, dotted})
    if (std::filesystem::exists(ts::data_dir() / name)) return ts::data_dir() / name;
  return {};
}

LabeledDataset one_per_class() {
  LabeledDataset ds;
  for (int c = 9; c >= 0; --c) {
    ImageGrid g{};
    g.pixels.fill(float(c) / 10.0f);
    ds.images.push_back(g);
    ds.labels.push_back(std::uint8_t(c));
    ds.ids.push_back(std::uint32_t(100 + c));
  }
  return ds;
}

}  // namespace

TEST(ParseImages, SingleZeroImage) {
  auto bytes = header({0x803, 1, 28, 28});
  bytes.resize(bytes.size() + 784, 0);
  const auto images = parse_idx_images(bytes);
  ASSERT_EQ(images.size(), 1u);
  for (float v : images[0]) EXPECT_EQ(v, 0.0f);
}

TEST(ParseImages, TruncatedPayload) {
  auto bytes = header({0x803, 2, 28, 28});
  bytes.resize(bytes.size() + 784, 7);
  EXPECT_EQ(error_kind([&] { parse_idx_images(bytes); }), ErrorKind::TruncatedFile);
  EXPECT_EQ(error_kind([&] { parse_idx_images(std::vector<std::uint8_t>(10)); }), ErrorKind::TruncatedFile);
}

TEST(ParseImages, BadMagic) {
  auto bytes = header({0x801, 1, 28, 28});
  bytes.resize(bytes.size() + 784, 0);
  EXPECT_EQ(error_kind([&] { parse_idx_images(bytes); }), ErrorKind::BadMagic);
}

TEST(ParseImages, WrongGridSize) {
  auto bytes = header({0x803, 1, 27, 28});
  bytes.resize(bytes.size() + 27 * 28, 0);
  EXPECT_EQ(error_kind([&] { parse_idx_images(bytes); }), ErrorKind::ShapeMismatch);
}

TEST(ParseLabels, DirectCopy) {
  auto bytes = header({0x801, 3});
  bytes.insert(bytes.end(), {0, 5, 9});
  EXPECT_EQ(parse_idx_labels(bytes), (std::vector<std::uint8_t>{0, 5, 9}));
}

TEST(ParseLabels, OutOfRange) {
  auto bytes = header({0x801, 2});
  bytes.insert(bytes.end(), {3, 12});
  EXPECT_EQ(error_kind([&] { parse_idx_labels(bytes); }), ErrorKind::LabelOutOfRange);
}

TEST(ParseLabels, BadMagicAndTruncation) {
  auto bytes = header({0x803, 1});
  bytes.push_back(1);
  EXPECT_EQ(error_kind([&] { parse_idx_labels(bytes); }), ErrorKind::BadMagic);
  auto short_bytes = header({0x801, 4});
  short_bytes.push_back(1);
  EXPECT_EQ(error_kind([&] { parse_idx_labels(short_bytes); }), ErrorKind::TruncatedFile);
}

TEST(Normalization, BijectiveOnBytes) {
  auto bytes = header({0x803, 1, 28, 28});
  for (int i = 0; i < 784; ++i) bytes.push_back(std::uint8_t(i % 256));
  const auto images = parse_idx_images(bytes);
  for (int i = 0; i < 784; ++i) {
    EXPECT_EQ(images[0][i], float(i % 256) / 255.0f);
    EXPECT_EQ(std::lround(double(images[0][i]) * 255.0), i % 256);
  }
  EXPECT_EQ(serialize_idx_images(images), bytes);
}

TEST(SamplePerClass, ForcedSelection) {
  const auto ds = one_per_class();
  const auto picks = sample_per_class(ds, 1, 42);
  for (int c = 0; c < 10; ++c) {
    ASSERT_EQ(picks.at(c).size(), 1u);
    EXPECT_EQ(ds.labels[picks.at(c)[0]], c);
  }
}

TEST(SamplePerClass, InsufficientMembers) {
  EXPECT_EQ(error_kind([&] { sample_per_class(one_per_class(), 2, 0); }), ErrorKind::InsufficientClassMembers);
}

TEST(SamplePerClass, PermutationInvariant) {
  LabeledDataset ds;
  for (std::uint32_t i = 0; i < 300; ++i) {
    ds.images.emplace_back();
    ds.labels.push_back(std::uint8_t(i % 10));
    ds.ids.push_back(i * 7 + 3);
  }
  LabeledDataset rev = ds;
  std::reverse(rev.labels.begin(), rev.labels.end());
  std::reverse(rev.ids.begin(), rev.ids.end());
  const auto a = sample_per_class(ds, 12, 5), b = sample_per_class(rev, 12, 5);
  for (int c = 0; c < 10; ++c)
    for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(ds.ids[a.at(c)[k]], rev.ids[b.at(c)[k]]);
}

class MnistFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!ts::have_mnist()) GTEST_SKIP() << "MNIST not found under " << ts::data_dir();
  }
};

TEST_F(MnistFiles, TestSetAgreesWithIndependentReader) {
  const auto raw_images = read_raw(mnist_file("t10k-images-idx3-ubyte"));
  const auto raw_labels = read_raw(mnist_file("t10k-labels-idx1-ubyte"));
  ASSERT_EQ(raw_images.dims, (std::vector<std::uint32_t>{10000, 28, 28}));
  ASSERT_EQ(raw_labels.payload.size(), 10000u);
  EXPECT_EQ(raw_labels.payload[0], 7);

  const auto ds = load_mnist(ts::data_dir(), Split::test);
  ASSERT_EQ(ds.size(), 10000u);
  EXPECT_EQ(ds.labels[0], 7);
  EXPECT_EQ(ds.labels, raw_labels.payload);
  for (std::size_t i = 0; i < ds.size(); i += 997)
    for (std::size_t p = 0; p < kPixels; ++p)
      ASSERT_EQ(ds.images[i][p], float(raw_images.payload[i * kPixels + p]) / 255.0f);
}

TEST_F(MnistFiles, TrainLabelCount) {
  const auto raw = read_raw(mnist_file("train-labels-idx1-ubyte"));
  ASSERT_EQ(raw.dims, (std::vector<std::uint32_t>{60000}));
  const auto labels = parse_idx_labels(read_file_bytes(mnist_file("train-labels-idx1-ubyte")));
  EXPECT_EQ(labels.size(), 60000u);
  EXPECT_EQ(labels, raw.payload);
}

TEST_F(MnistFiles, ByteForByteRoundTrip) {
  for (auto stem : {"t10k", "train"}) {
    const auto img_path = mnist_file(std::string(stem) + "-images-idx3-ubyte");
    const auto lbl_path = mnist_file(std::string(stem) + "-labels-idx1-ubyte");
    const auto img_bytes = read_file_bytes(img_path), lbl_bytes = read_file_bytes(lbl_path);
    EXPECT_EQ(serialize_idx_images(parse_idx_images(img_bytes)), img_bytes) << stem;
    EXPECT_EQ(serialize_idx_labels(parse_idx_labels(lbl_bytes)), lbl_bytes) << stem;
  }
}

TEST_F(MnistFiles, SamplePerClassAtPaperScale) {
  const auto ds = load_mnist(ts::data_dir(), Split::test);
  const auto picks = sample_per_class(ds, 500, 2024);
  ASSERT_EQ(picks.size(), 10u);
  for (const auto& [c, idx] : picks) {
    ASSERT_EQ(idx.size(), 500u);
    EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 500u);
    for (auto i : idx) EXPECT_EQ(ds.labels[i], c);
  }
  EXPECT_EQ(sample_per_class(ds, 500, 2024), picks);
  EXPECT_NE(sample_per_class(ds, 500, 2025), picks);
}

TEST_F(MnistFiles, SubsampleIsSeededAndOrdered) {
  const auto ds = load_mnist(ts::data_dir(), Split::test);
  const auto a = subsample(ds, 2000, 1), b = subsample(ds, 2000, 1);
  ASSERT_EQ(a.size(), 2000u);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_TRUE(std::is_sorted(a.ids.begin(), a.ids.end()));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.labels[i], ds.labels[a.ids[i]]);
}
