#include <gtest/gtest.h>

#include <bit>
#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include "ganblend/checkpoint.hpp"
#include "ganblend/config.hpp"
#include "ganblend/generator.hpp"
#include "ganblend/manifest.hpp"
#include "test_util.hpp"

using namespace ganblend;
using testutil::base_fixture;

namespace {

// Writes GWTC straight from the format description, independent of encode_gwtc.
struct RefWriter {
  std::vector<std::uint8_t> out;
  void u(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }
};

std::vector<std::uint8_t> reference_gwtc(const Checkpoint& c, std::uint32_t version = 1) {
  std::map<std::string, const Tensor*> sorted;
  for (const auto& [n, t] : c.params()) sorted.emplace(n, &t);
  const std::string meta = config_to_json(c.meta());
  RefWriter w;
  w.str("GWTC");
  w.u(version, 4);
  w.u(sorted.size() + 1, 8);
  bool meta_done = false;
  auto put_meta = [&] {
    w.u(8, 4);
    w.str("__meta__");
    w.u(1, 1);
    w.u(0, 1);
    w.u(meta.size(), 8);
    w.str(meta);
    meta_done = true;
  };
  for (const auto& [n, t] : sorted) {
    if (!meta_done && n > "__meta__") put_meta();
    w.u(n.size(), 4);
    w.str(n);
    w.u(0, 1);
    w.u(t->rank(), 1);
    for (auto d : t->dims()) w.u(d, 4);
    w.u(t->size() * 4, 8);
    for (float f : t->values()) w.u(testutil::float_bits(f), 4);
  }
  if (!meta_done) put_meta();
  return w.out;
}

ErrorKind decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_gwtc(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorKind::InvalidArgument;
}

std::string decode_message(std::span<const std::uint8_t> bytes) {
  try {
    decode_gwtc(bytes);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

GeneratorConfig random_config(KeyedStream& s) {
  GeneratorConfig c;
  c.latent_dim = 1 + static_cast<int>(s.next_u64() % 6);
  c.style_dim = 1 + static_cast<int>(s.next_u64() % 6);
  c.mapping_layers = 1 + static_cast<int>(s.next_u64() % 3);
  c.max_resolution = 4 << (s.next_u64() % 3);
  c.channels_per_band.clear();
  for (int r = 4; r <= c.max_resolution; r *= 2) {
    c.channels_per_band[r] = 1 + static_cast<int>(s.next_u64() % 4);
  }
  return c;
}

// Random values including signed zeros, subnormals and NaN payloads.
Checkpoint random_checkpoint(const GeneratorConfig& config, KeyedStream& s) {
  ParamMap params;
  for (const auto& spec : manifest(config)) {
    Tensor t(spec.shape);
    for (float& v : t.values()) {
      switch (s.next_u64() % 8) {
        case 0: v = -0.0f; break;
        case 1: v = std::bit_cast<float>(static_cast<std::uint32_t>(s.next_u64() & 0x007fffff)); break;
        case 2: v = std::bit_cast<float>(0x7fc00000u | static_cast<std::uint32_t>(s.next_u64() & 0x3fffff)); break;
        default: v = s.next_normal() * 100.0f;
      }
    }
    params.emplace(spec.name, std::move(t));
  }
  return Checkpoint(config, std::move(params));
}

ParamMap params_of(const Checkpoint& c) { return c.params(); }

}  // namespace

TEST(Gwtc, MatchesReferenceWriterByteForByte) {
  const auto c = init_random(testutil::small_config(), 3);
  EXPECT_EQ(encode_gwtc(c), reference_gwtc(c));
  EXPECT_EQ(encode_gwtc(base_fixture()), reference_gwtc(base_fixture()));
}

TEST(Gwtc, HeaderIsSixteenBytes) {
  const auto bytes = encode_gwtc(base_fixture());
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GWTC");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  std::uint64_t count = 0;
  for (int i = 7; i >= 0; --i) count = (count << 8) | bytes[8 + i];
  EXPECT_EQ(count, base_fixture().size() + 1);
  // first entry follows immediately: name length of "__meta__"
  EXPECT_EQ(bytes[16], 8);
}

TEST(Gwtc, SaveLoadRoundTripAndDeterminism) {
  testutil::TempDir dir;
  save(base_fixture(), dir / "a.gwt");
  save(base_fixture(), dir / "b.gwt");
  std::ifstream a(dir / "a.gwt", std::ios::binary), b(dir / "b.gwt", std::ios::binary);
  const std::vector<char> ba{std::istreambuf_iterator<char>(a), {}};
  const std::vector<char> bb{std::istreambuf_iterator<char>(b), {}};
  EXPECT_EQ(ba, bb);
  const auto loaded = load(dir / "a.gwt");
  EXPECT_TRUE(bit_equal(loaded, base_fixture()));
  EXPECT_EQ(loaded.size(), manifest(GeneratorConfig{}).size());
}

TEST(Gwtc, PropertyRoundTripRandomConfigs) {
  KeyedStream s(99, "gwtc-property");
  for (int trial = 0; trial < 60; ++trial) {
    const auto config = random_config(s);
    const auto c = random_checkpoint(config, s);
    const auto bytes = encode_gwtc(c);
    EXPECT_EQ(bytes, reference_gwtc(c));
    const auto back = decode_gwtc(bytes);
    ASSERT_TRUE(bit_equal(back, c)) << config_to_json(config);
    EXPECT_EQ(encode_gwtc(back), bytes);
  }
}

TEST(Gwtc, DifferentContentDifferentBytes) {
  const auto& a = base_fixture();
  auto params = params_of(a);
  params.at("synthesis.b8.conv1.bias")[3] = 1e-30f;
  const Checkpoint b(a.meta(), std::move(params));
  EXPECT_NE(encode_gwtc(a), encode_gwtc(b));
}

TEST(Gwtc, BadMagic) {
  auto bytes = encode_gwtc(base_fixture());
  bytes[0] = 'X';
  EXPECT_EQ(decode_error(bytes), ErrorKind::BadMagic);
}

TEST(Gwtc, UnsupportedVersion) {
  const auto bytes = reference_gwtc(base_fixture(), 2);
  EXPECT_EQ(decode_error(bytes), ErrorKind::UnsupportedVersion);
}

TEST(Gwtc, EveryTruncationIsDetected) {
  const auto c = init_random(testutil::small_config(), 1);
  const auto bytes = encode_gwtc(c);
  for (std::size_t n = 0; n < bytes.size(); n += (n < 64 ? 1 : 7)) {
    EXPECT_EQ(decode_error(std::span(bytes).first(n)), ErrorKind::Truncated) << n;
  }
}

TEST(Gwtc, ExtraParameterIsNamed) {
  const auto& a = base_fixture();
  auto params = params_of(a);
  params.emplace("synthesis.b8.extra", Tensor({2}));
  EXPECT_THROW(Checkpoint(a.meta(), params), Error);

  // Splice an extra entry into otherwise valid bytes via the reference writer.
  RefWriter w;
  const std::string meta = config_to_json(a.meta());
  std::map<std::string, Tensor> all(a.params().begin(), a.params().end());
  all.emplace("synthesis.b8.zzz_unknown", Tensor({2}));
  w.str("GWTC");
  w.u(1, 4);
  w.u(all.size() + 1, 8);
  w.u(8, 4);
  w.str("__meta__");
  w.u(1, 1);
  w.u(0, 1);
  w.u(meta.size(), 8);
  w.str(meta);
  for (const auto& [n, t] : all) {
    w.u(n.size(), 4);
    w.str(n);
    w.u(0, 1);
    w.u(t.rank(), 1);
    for (auto d : t.dims()) w.u(d, 4);
    w.u(t.size() * 4, 8);
    for (float f : t.values()) w.u(testutil::float_bits(f), 4);
  }
  EXPECT_EQ(decode_error(w.out), ErrorKind::Manifest);
  EXPECT_NE(decode_message(w.out).find("synthesis.b8.zzz_unknown"), std::string::npos);
}

TEST(Gwtc, MissingAndMisshapenParameters) {
  const auto& a = base_fixture();
  auto missing = params_of(a);
  missing.erase("synthesis.b32.torgb.bias");
  try {
    Checkpoint(a.meta(), missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Manifest);
    EXPECT_NE(std::string(e.what()).find("synthesis.b32.torgb.bias"), std::string::npos);
  }
  auto wrong = params_of(a);
  wrong.at("mapping.fc0.bias") = Tensor({63});
  EXPECT_THROW(Checkpoint(a.meta(), wrong), Error);
}

TEST(Gwtc, TrailingBytesRejected) {
  auto bytes = encode_gwtc(init_random(testutil::small_config(), 1));
  bytes.push_back(0);
  EXPECT_EQ(decode_error(bytes), ErrorKind::Format);
}

TEST(Gwtc, MissingFileIsIo) {
  try {
    load("/nonexistent/x.gwt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Config, JsonRoundTripAndValidation) {
  const auto c = testutil::small_config();
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_EQ(config_from_json("{}"), GeneratorConfig{});
  EXPECT_THROW(config_from_json(R"({"max_resolution": 12})"), Error);
  EXPECT_THROW(config_from_json(R"({"max_resolution": 8, "channels_per_band": {"4": 2}})"), Error);
  EXPECT_THROW(config_from_json(R"({"latent_dim": 0})"), Error);
  EXPECT_THROW(config_from_json("not json"), Error);
  EXPECT_EQ(GeneratorConfig{}.bands(), (std::vector<int>{4, 8, 16, 32, 64}));
}

TEST(Registry, PutGetAndIdentity) {
  Registry reg;
  const auto id1 = reg.put(base_fixture(), "base");
  const auto id2 = reg.put(base_fixture());
  EXPECT_NE(id1, id2);
  EXPECT_TRUE(bit_equal(*reg.get(id1), base_fixture()));
  EXPECT_EQ(reg.entry(id1).name, "base");
  EXPECT_EQ(reg.entry(id2).name, id2);
  EXPECT_EQ(reg.list().size(), 2u);
  try {
    reg.get("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFound);
  }
}

TEST(Registry, ConcurrentWritersAndReaders) {
  Registry reg;
  const auto small = init_random(testutil::small_config(), 0);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 50; ++i) {
        const auto id = reg.put(small);
        EXPECT_TRUE(bit_equal(*reg.get(id), small));
        for (const auto& e : reg.list()) EXPECT_TRUE(e.checkpoint != nullptr);
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto all = reg.list();
  EXPECT_EQ(all.size(), 200u);
  std::set<std::string> ids;
  for (const auto& e : all) ids.insert(e.id);
  EXPECT_EQ(ids.size(), 200u);
}
