#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "con2da/data.hpp"
#include "con2da/errors.hpp"

static_assert(std::endian::native == std::endian::little, "dataset format assumes a little-endian host");

namespace con2da {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'S', 'D', 'A'};

// Split tags in file order.
enum class SplitTag : std::uint8_t {
  source_labeled = 0,
  target_labeled = 1,
  target_unlabeled = 2,
  target_validation = 3,
};

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    T v;
    read_into(&v, sizeof(T), field);
    return v;
  }
  void read_into(void* out, std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(pos_, field,
                       "truncated: need " + std::to_string(n) + " bytes, " +
                           std::to_string(bytes_.size() - pos_) + " remain");
    }
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_split(Writer& w, SplitTag tag, const std::vector<Sample>& split,
                 const std::vector<int>* hidden) {
  w.put(static_cast<std::uint8_t>(tag));
  w.put(static_cast<std::uint64_t>(split.size()));
  for (std::size_t i = 0; i < split.size(); ++i) {
    const Sample& s = split[i];
    w.put(s.id);
    w.put(static_cast<std::int32_t>(hidden ? (*hidden)[i] : s.label.value_or(-1)));
    w.put(s.image.channels);
    w.put(s.image.height);
    w.put(s.image.width);
    w.put_bytes(s.image.pixels.data(), s.image.pixels.size() * sizeof(float));
  }
}

std::vector<Sample> read_split(Reader& r, SplitTag expected, std::uint32_t num_classes) {
  const std::size_t tag_offset = r.offset();
  const auto tag = r.get<std::uint8_t>("split_tag");
  if (tag != static_cast<std::uint8_t>(expected)) {
    throw ParseError(tag_offset, "split_tag",
                     "expected " + std::to_string(static_cast<int>(expected)) + ", found " +
                         std::to_string(tag));
  }
  const std::size_t count_offset = r.offset();
  const auto count = r.get<std::uint64_t>("count");
  // Each sample needs at least its 24-byte fixed header.
  if (count > r.remaining() / 24) {
    throw ParseError(count_offset, "count", "count " + std::to_string(count) + " exceeds file size");
  }
  const Domain domain = expected == SplitTag::source_labeled ? Domain::source : Domain::target;
  std::vector<Sample> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Sample s;
    s.domain = domain;
    s.id = r.get<std::uint64_t>("id");
    const std::size_t label_offset = r.offset();
    const auto label = r.get<std::int32_t>("label");
    if (label < -1 || (label >= 0 && static_cast<std::uint32_t>(label) >= num_classes)) {
      throw ParseError(label_offset, "label", "label " + std::to_string(label) + " out of range");
    }
    if (label >= 0) s.label = label;
    const auto c = r.get<std::uint32_t>("channels");
    const auto h = r.get<std::uint32_t>("height");
    const std::size_t width_offset = r.offset();
    const auto w = r.get<std::uint32_t>("width");
    const std::uint64_t n = std::uint64_t{c} * h * w;
    if (n == 0 || n > r.remaining() / sizeof(float)) {
      throw ParseError(width_offset, "width", "image shape inconsistent with remaining bytes");
    }
    s.image = Image(c, h, w);
    r.read_into(s.image.pixels.data(), n * sizeof(float), "pixels");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_dataset(const SsdaDataset& dataset) {
  Writer w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put(kDatasetFormatVersion);
  w.put(dataset.num_classes());
  write_split(w, SplitTag::source_labeled, dataset.source_labeled(), nullptr);
  write_split(w, SplitTag::target_labeled, dataset.target_labeled(), nullptr);
  // The unlabeled section stores the vault labels so round trips keep the evaluation truth.
  write_split(w, SplitTag::target_unlabeled, dataset.target_unlabeled(),
              &dataset.hidden_labels_for_serialization());
  write_split(w, SplitTag::target_validation, dataset.target_validation(), nullptr);
  return w.take();
}

SsdaDataset parse_dataset(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  std::array<char, 4> magic{};
  r.read_into(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw ParseError(0, "magic", "not an SSDA dataset file");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kDatasetFormatVersion) {
    throw ParseError(4, "version", "unsupported format version " + std::to_string(version));
  }
  const auto k = r.get<std::uint32_t>("num_classes");
  if (k == 0) throw ParseError(8, "num_classes", "validation failed: K must be positive");

  auto source = read_split(r, SplitTag::source_labeled, k);
  auto labeled = read_split(r, SplitTag::target_labeled, k);
  auto unlabeled = read_split(r, SplitTag::target_unlabeled, k);
  auto validation = read_split(r, SplitTag::target_validation, k);
  if (r.remaining() != 0) {
    throw ParseError(r.offset(), "trailer", std::to_string(r.remaining()) + " trailing bytes");
  }
  try {
    return SsdaDataset(k, std::move(source), std::move(labeled), std::move(unlabeled),
                       std::move(validation));
  } catch (const ContractViolation& e) {
    throw ParseError(r.offset(), "splits", e.what());
  }
}

void save_dataset(const SsdaDataset& dataset, const std::filesystem::path& path) {
  const auto bytes = serialize_dataset(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

SsdaDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return parse_dataset(bytes);
}

}  // namespace con2da
