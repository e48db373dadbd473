#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "con2da/data.hpp"
#include "con2da/errors.hpp"
#include "con2da/image.hpp"
#include "con2da/rng.hpp"

using namespace con2da;

namespace {

ShiftSpec small_spec(std::uint32_t k, std::size_t n, double magnitude = 20.0,
                     Generator g = Generator::textured_grid) {
  ShiftSpec s;
  s.generator = g;
  s.num_classes = k;
  s.samples_per_domain = n;
  s.shift_magnitude = magnitude;
  s.seed = 123;
  s.height = 8;
  s.width = 8;
  return s;
}

double image_mean(const Image& img) {
  double s = 0.0;
  for (float v : img.pixels) s += v;
  return s / static_cast<double>(img.pixels.size());
}

std::set<std::uint64_t> ids_of(const std::vector<Sample>& v) {
  std::set<std::uint64_t> out;
  for (const Sample& s : v) out.insert(s.id);
  return out;
}

}  // namespace

TEST_CASE("protocol conformance of generated splits") {
  for (std::uint32_t k : {2u, 5u, 10u}) {
    for (std::size_t shots : {1u, 3u}) {
      CAPTURE(k);
      CAPTURE(shots);
      const SsdaDataset d = generate_synthetic_ssda(small_spec(k, 200), shots);
      CHECK(d.num_classes() == k);
      CHECK(d.shots() == shots);
      CHECK(d.target_labeled().size() == k * shots);
      CHECK(d.target_validation().size() == k * kValidationPerClass);
      CHECK(d.source_labeled().size() == 200);
      CHECK(d.target_labeled().size() + d.target_validation().size() + d.target_unlabeled().size() == 200);

      std::map<int, std::size_t> per_class_labeled, per_class_val;
      for (const Sample& s : d.target_labeled()) ++per_class_labeled[*s.label];
      for (const Sample& s : d.target_validation()) ++per_class_val[*s.label];
      for (std::uint32_t c = 0; c < k; ++c) {
        CHECK(per_class_labeled[static_cast<int>(c)] == shots);
        CHECK(per_class_val[static_cast<int>(c)] == kValidationPerClass);
      }

      const auto src = ids_of(d.source_labeled()), tl = ids_of(d.target_labeled()),
                 tu = ids_of(d.target_unlabeled()), tv = ids_of(d.target_validation());
      std::set<std::uint64_t> all;
      for (const auto* s : {&src, &tl, &tu, &tv}) all.insert(s->begin(), s->end());
      CHECK(all.size() == src.size() + tl.size() + tu.size() + tv.size());

      for (const Sample& s : d.target_unlabeled()) {
        CHECK_FALSE(s.label.has_value());
        CHECK(s.domain == Domain::target);
      }
      for (const Sample& s : d.source_labeled()) CHECK(s.domain == Domain::source);
      CHECK(d.audit().read_count() == 0);
    }
  }
}

TEST_CASE("K = 2, three shots: six labeled and six validation targets") {
  const SsdaDataset d = generate_synthetic_ssda(small_spec(2, 60), 3);
  CHECK(d.target_labeled().size() == 6);
  CHECK(d.target_validation().size() == 6);
}

TEST_CASE("hidden labels are only reachable through the audited reveal") {
  const SsdaDataset d = generate_synthetic_ssda(small_spec(3, 60), 1);
  const SsdaDataset copy = d;
  CHECK(d.audit().read_count() == 0);
  const auto revealed = copy.reveal_unlabeled("test:reveal");
  CHECK(revealed.size() == d.target_unlabeled().size());
  for (const Sample& s : revealed) CHECK(s.label.has_value());
  // Copies share one log.
  REQUIRE(d.audit().read_count() == 1);
  CHECK(d.audit().entries()[0].caller == "test:reveal");
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  const ShiftSpec s = small_spec(3, 60);
  const SsdaDataset a = generate_synthetic_ssda(s, 3), b = generate_synthetic_ssda(s, 3);
  CHECK(a == b);
  CHECK(a.checksum() == b.checksum());
  ShiftSpec other = s;
  other.seed = 124;
  CHECK(generate_synthetic_ssda(other, 3).checksum() != a.checksum());
}

TEST_CASE("zero shift: source and target class means agree within sampling noise") {
  for (Generator g : {Generator::two_moons, Generator::gaussian_blobs, Generator::textured_grid}) {
    CAPTURE(to_string(g));
    const SsdaDataset d = generate_synthetic_ssda(small_spec(4, 400, 0.0, g), 3);
    std::map<int, std::vector<double>> src, tgt;
    for (const Sample& s : d.source_labeled()) src[*s.label].push_back(image_mean(s.image));
    for (const Sample& s : d.reveal_unlabeled("test:zero_shift")) tgt[*s.label].push_back(image_mean(s.image));
    for (int c = 0; c < 4; ++c) {
      auto stats = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        return std::pair{m, var / static_cast<double>(v.size() - 1)};
      };
      const auto [ms, vs] = stats(src[c]);
      const auto [mt, vt] = stats(tgt[c]);
      const double se = std::sqrt(vs / static_cast<double>(src[c].size()) + vt / static_cast<double>(tgt[c].size()));
      CHECK(std::abs(ms - mt) < 3.0 * se);
    }
  }
}

TEST_CASE("channel swap maps channel 1 onto channel 0 for a paired sample") {
  const ShiftSpec s = small_spec(5, 100);
  for (int label = 0; label < 5; ++label) {
    Rng rng(label + 1);
    const Image src = render_class_image(s, label, rng);
    const Image tgt = apply_shift(src, ShiftKind::channel_swap, 1.0, rng);
    double m0 = 0.0, m1 = 0.0, n0 = 0.0, n1 = 0.0;
    for (std::uint32_t y = 0; y < s.height; ++y) {
      for (std::uint32_t x = 0; x < s.width; ++x) {
        m0 += tgt.at(0, y, x), m1 += src.at(1, y, x);
        n0 += tgt.at(1, y, x), n1 += src.at(0, y, x);
      }
    }
    CHECK(std::abs(m0 - m1) / (s.height * s.width) < 1e-6);
    CHECK(std::abs(n0 - n1) / (s.height * s.width) < 1e-6);
  }
}

TEST_CASE("generator rejects impossible requests") {
  CHECK_THROWS_AS(generate_synthetic_ssda(small_spec(0, 100), 3), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_ssda(small_spec(5, 100), 0), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_ssda(small_spec(5, 50), 3), ConfigError);
  CHECK_THROWS_AS(generate_synthetic_ssda(small_spec(5, 100, -1.0), 3), ConfigError);
  CHECK_THROWS_AS(parse_generator("spirals"), ConfigError);
  CHECK_THROWS_AS(parse_shift_kind("warp"), ConfigError);
}

TEST_CASE("resolve_batch_size") {
  CHECK(resolve_batch_size(378) == 256);
  CHECK(resolve_batch_size(93) == 92);
  CHECK(resolve_batch_size(2) == 2);
  CHECK(resolve_batch_size(1) == 2);
  CHECK(resolve_batch_size(15) == 14);
  CHECK(resolve_batch_size(256) == 256);
}

TEST_CASE("labeled sampler composition") {
  const SsdaDataset d = generate_synthetic_ssda(small_spec(2, 60), 1);  // n_t = 2
  SUBCASE("N = 4 gives two source and two target samples per batch") {
    LabeledBatchSampler s(d, {4, 4}, 9);
    for (int i = 0; i < 1000; ++i) {
      const Batch b = s.next();
      REQUIRE(b.size() == 4);
      CHECK(b[0]->domain == Domain::source);
      CHECK(b[1]->domain == Domain::source);
      CHECK(b[2]->domain == Domain::target);
      CHECK(b[3]->domain == Domain::target);
    }
  }
  SUBCASE("n_t = 2, N = 8 repeats target samples within a batch") {
    LabeledBatchSampler s(d, {8, 8}, 9);
    bool repeated = false;
    for (int i = 0; i < 20; ++i) {
      const Batch b = s.next();
      std::set<std::uint64_t> tgt;
      for (std::size_t j = 4; j < 8; ++j) tgt.insert(b[j]->id);
      CHECK(tgt.size() <= 2);
      repeated = repeated || tgt.size() < 4;
    }
    CHECK(repeated);
  }
  SUBCASE("same seed gives the same sequence") {
    LabeledBatchSampler a(d, {4, 4}, 3), b(d, {4, 4}, 3);
    for (int i = 0; i < 50; ++i) CHECK(a.next() == b.next());
  }
  SUBCASE("odd batch sizes are rejected") {
    CHECK_THROWS_AS(LabeledBatchSampler(d, {3, 4}, 0), ConfigError);
    CHECK_THROWS_AS(LabeledBatchSampler(d, {0, 4}, 0), ConfigError);
  }
}

TEST_CASE("labeled sampler walks every source sample once per pass") {
  const SsdaDataset d = generate_synthetic_ssda(small_spec(2, 60), 3);
  LabeledBatchSampler s(d, {6, 6}, 4);
  std::map<std::uint64_t, int> seen;
  for (int i = 0; i < 20; ++i) {  // 20 batches x 3 sources = one pass over 60
    const Batch b = s.next();
    for (std::size_t j = 0; j < 3; ++j) ++seen[b[j]->id];
  }
  CHECK(seen.size() == 60);
  for (const auto& [id, n] : seen) CHECK(n == 1);
}

TEST_CASE("unlabeled sampler") {
  // 2 classes x 8 samples: 2 labeled + 6 validation + 8 unlabeled. Pad to get n_u = 10.
  ShiftSpec spec = small_spec(2, 36);
  const SsdaDataset d = generate_synthetic_ssda(spec, 1);
  REQUIRE(d.target_unlabeled().size() == 28);

  SUBCASE("one cycle of 28 in batches of 8 ends with a short batch of 4") {
    UnlabeledBatchSampler s(d, {8, 8}, 1);
    std::set<std::uint64_t> pass;
    for (std::size_t expected : {8u, 8u, 8u, 4u}) {
      const Batch b = s.next();
      CHECK(b.size() == expected);
      for (const Sample* x : b) pass.insert(x->id);
    }
    CHECK(pass == ids_of(d.target_unlabeled()));
    CHECK(s.next().size() == 8);
  }
  SUBCASE("same seed, same sequence; ids stay inside the pool") {
    UnlabeledBatchSampler a(d, {4, 4}, 2), b(d, {4, 4}, 2);
    const auto pool = ids_of(d.target_unlabeled());
    for (int i = 0; i < 30; ++i) {
      const Batch x = a.next();
      CHECK(x == b.next());
      for (const Sample* s : x) CHECK(pool.count(s->id) == 1);
    }
  }
}

TEST_CASE("unlabeled sampler: ten samples in batches of four give 4, 4, 2") {
  std::vector<Sample> src, tl, tu, tv;
  auto make = [](std::uint64_t id, int label, Domain dom) {
    Sample s;
    s.id = id;
    s.image = Image(1, 2, 2, 0.5f);
    s.label = label;
    s.domain = dom;
    return s;
  };
  std::uint64_t id = 0;
  for (int c = 0; c < 2; ++c) {
    src.push_back(make(id++, c, Domain::source));
    tl.push_back(make(id++, c, Domain::target));
    for (int j = 0; j < 3; ++j) tv.push_back(make(id++, c, Domain::target));
    for (int j = 0; j < 5; ++j) tu.push_back(make(id++, c, Domain::target));
  }
  const SsdaDataset d(2, src, tl, tu, tv);
  UnlabeledBatchSampler s(d, {4, 4}, 0);
  CHECK(s.next().size() == 4);
  CHECK(s.next().size() == 4);
  CHECK(s.next().size() == 2);
  CHECK(s.next().size() == 4);
}

TEST_CASE("dataset constructor enforces split invariants") {
  auto make = [](std::uint64_t id, std::optional<int> label, Domain dom) {
    Sample s;
    s.id = id;
    s.image = Image(1, 2, 2, 0.5f);
    s.label = label;
    s.domain = dom;
    return s;
  };
  std::vector<Sample> src{make(0, 0, Domain::source), make(1, 1, Domain::source)};
  std::vector<Sample> tl{make(2, 0, Domain::target), make(3, 1, Domain::target)};
  std::vector<Sample> tv;
  for (std::uint64_t i = 0; i < 6; ++i) tv.push_back(make(10 + i, static_cast<int>(i % 2), Domain::target));
  std::vector<Sample> tu{make(20, 0, Domain::target), make(21, 1, Domain::target)};
  CHECK_NOTHROW(SsdaDataset(2, src, tl, tu, tv));

  auto dup = tu;
  dup[0].id = 2;  // collides with a labeled target id
  CHECK_THROWS_AS(SsdaDataset(2, src, tl, dup, tv), ContractViolation);
  auto bad_label = tl;
  bad_label[0].label = 7;
  CHECK_THROWS_AS(SsdaDataset(2, src, bad_label, tu, tv), ContractViolation);
  auto short_val = tv;
  short_val.pop_back();
  CHECK_THROWS_AS(SsdaDataset(2, src, tl, tu, short_val), ContractViolation);
}

TEST_CASE("dataset file round-trip") {
  const SsdaDataset d = generate_synthetic_ssda(small_spec(3, 60, 10.0), 3);
  const auto bytes = serialize_dataset(d);
  const SsdaDataset back = parse_dataset(bytes);
  CHECK(back == d);
  CHECK(back.checksum() == d.checksum());
  CHECK(d.audit().read_count() == 0);

  const auto path = std::filesystem::temp_directory_path() / "con2da_test_roundtrip.ssda";
  save_dataset(d, path);
  CHECK(load_dataset(path) == d);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_dataset(path), IoError);
}

TEST_CASE("malformed dataset files") {
  const SsdaDataset d = generate_synthetic_ssda(small_spec(2, 60), 1);
  const auto bytes = serialize_dataset(d);

  SUBCASE("every truncation is a parse error") {
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9}, std::size_t{40}, bytes.size() / 2,
                            bytes.size() - 1}) {
      CAPTURE(cut);
      const std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
      CHECK_THROWS_AS(parse_dataset(head), ParseError);
    }
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK_THROWS_AS(parse_dataset(b), ParseError);
  }
  SUBCASE("K = 0 is rejected at the header") {
    auto b = bytes;
    b[8] = b[9] = b[10] = b[11] = 0;
    try {
      parse_dataset(b);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.field() == "num_classes");
      CHECK(e.offset() == 8);
    }
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    CHECK_THROWS_AS(parse_dataset(b), ParseError);
  }
}
