#include "con2da/model.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "con2da/errors.hpp"
#include "con2da/ops.hpp"
#include "con2da/rng.hpp"

namespace con2da {

std::size_t FeatureExtractor::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.rows();
}

std::size_t FeatureExtractor::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.cols();
}

void ModelDims::validate() const {
  if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
  if (feature_dim == 0) throw ConfigError("model: feature_dim must be positive");
  if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model: hidden widths must be positive");
  }
}

ModelDims Con2daModel::dims() const {
  ModelDims d;
  d.input_dim = extractor.input_dim();
  d.hidden.clear();
  for (std::size_t i = 0; i + 1 < extractor.layers.size(); ++i) {
    d.hidden.push_back(extractor.layers[i].weight.cols());
  }
  d.feature_dim = extractor.output_dim();
  d.num_classes = classifier.num_classes();
  return d;
}

std::vector<Tensor> Con2daModel::extractor_parameters() const {
  std::vector<Tensor> out;
  for (const Linear& l : extractor.layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

std::vector<Tensor> Con2daModel::parameters() const {
  auto out = extractor_parameters();
  out.push_back(classifier.prototypes);
  return out;
}

Con2daModel Con2daModel::clone() const {
  Con2daModel copy = *this;
  for (Linear& l : copy.extractor.layers) {
    l.weight = l.weight.clone();
    l.bias = l.bias.clone();
  }
  copy.classifier.prototypes = copy.classifier.prototypes.clone();
  return copy;
}

void Con2daModel::assign_from(const Con2daModel& other) {
  auto dst = parameters();
  const auto src = other.parameters();
  if (dst.size() != src.size()) throw ContractViolation("assign_from: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].shape() != src[i].shape()) throw ContractViolation("assign_from: shape mismatch");
    const auto values = src[i].values();
    std::copy(values.begin(), values.end(), dst[i].mutable_values().begin());
  }
}

Tensor images_to_tensor(std::span<const Image* const> images) {
  if (images.empty()) throw ContractViolation("images_to_tensor: empty batch");
  const std::size_t dim = images.front()->pixels.size();
  std::vector<double> values;
  values.reserve(images.size() * dim);
  for (const Image* img : images) {
    if (img->pixels.size() != dim) throw ContractViolation("images_to_tensor: mixed image sizes");
    values.insert(values.end(), img->pixels.begin(), img->pixels.end());
  }
  return Tensor::matrix(images.size(), dim, std::move(values));
}

Tensor extract_features(const FeatureExtractor& model, const Tensor& pixels) {
  if (model.layers.empty()) throw ContractViolation("extract_features: model has no layers");
  if (pixels.rank() != 2 || pixels.cols() != model.input_dim()) {
    throw ContractViolation("extract_features: expected [batch, " + std::to_string(model.input_dim()) +
                            "] input");
  }
  Tensor h = pixels;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    h = add_row_vector(matmul(h, model.layers[i].weight), model.layers[i].bias);
    if (i + 1 < model.layers.size()) h = relu(h);
  }
  return h;
}

Tensor classify_normalized(const Tensor& z, const PrototypeClassifier& clf, bool detach_prototypes) {
  Tensor w = detach_prototypes ? clf.prototypes.detach() : clf.prototypes;
  // Columns are normalized by normalizing the rows of the transpose.
  if (clf.normalized) w = transpose(l2_normalize(transpose(w)));
  return softmax_with_temperature(matmul(z, w), clf.temperature);
}

Tensor normalize_and_classify(const Tensor& features, const PrototypeClassifier& clf,
                              bool detach_prototypes) {
  return classify_normalized(l2_normalize(features), clf, detach_prototypes);
}

namespace {

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor({fan_in, fan_out}, std::move(values), true);
}

}  // namespace

Con2daModel init_model(std::uint64_t seed, const ModelDims& dims, double temperature, bool normalized) {
  dims.validate();
  if (!(temperature > 0.0)) throw InvalidHyperparameter("init_model: temperature must be > 0");
  Rng rng(seed);
  Con2daModel model;
  std::size_t in = dims.input_dim;
  std::vector<std::size_t> widths = dims.hidden;
  widths.push_back(dims.feature_dim);
  for (std::size_t out : widths) {
    model.extractor.layers.push_back({glorot(rng, in, out), Tensor::zeros({out}, true)});
    in = out;
  }
  model.classifier.prototypes = glorot(rng, dims.feature_dim, dims.num_classes);
  model.classifier.temperature = temperature;
  model.classifier.normalized = normalized;
  return model;
}

// -- checkpoint ---------------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kModelMagic{'C', '2', 'D', 'A'};

template <typename T>
void put(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  const auto values = t.values();
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  out.insert(out.end(), p, p + values.size() * sizeof(double));
}

class ModelReader {
 public:
  explicit ModelReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* field) {
    T v;
    read(&v, sizeof(T), field);
    return v;
  }
  void read(void* dst, std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n) throw ParseError(pos_, field, "truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

Tensor read_tensor(ModelReader& r, Shape shape, const char* field) {
  const std::size_t n = shape_numel(shape);
  if (n > r.remaining() / sizeof(double)) throw ParseError(r.offset(), field, "truncated");
  std::vector<double> values(n);
  r.read(values.data(), n * sizeof(double), field);
  return Tensor(std::move(shape), std::move(values), true);
}

}  // namespace

void save_model(const Con2daModel& model, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out(kModelMagic.begin(), kModelMagic.end());
  put(out, kModelFormatVersion);
  put(out, static_cast<std::uint32_t>(model.extractor.layers.size()));
  for (const Linear& l : model.extractor.layers) {
    put(out, static_cast<std::uint64_t>(l.weight.rows()));
    put(out, static_cast<std::uint64_t>(l.weight.cols()));
  }
  put(out, static_cast<std::uint64_t>(model.classifier.num_classes()));
  put(out, model.classifier.temperature);
  put(out, static_cast<std::uint8_t>(model.classifier.normalized ? 1 : 0));
  for (const Linear& l : model.extractor.layers) {
    put_tensor(out, l.weight);
    put_tensor(out, l.bias);
  }
  put_tensor(out, model.classifier.prototypes);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Con2daModel load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  ModelReader r(bytes);
  std::array<char, 4> magic{};
  r.read(magic.data(), magic.size(), "magic");
  if (magic != kModelMagic) throw ParseError(0, "magic", "not a model checkpoint");
  if (const auto v = r.get<std::uint32_t>("version"); v != kModelFormatVersion) {
    throw ParseError(4, "version", "unsupported checkpoint version " + std::to_string(v));
  }
  const auto layer_count = r.get<std::uint32_t>("layer_count");
  if (layer_count == 0 || layer_count > 64) throw ParseError(8, "layer_count", "implausible layer count");
  std::vector<std::array<std::uint64_t, 2>> shapes(layer_count);
  for (auto& s : shapes) {
    s[0] = r.get<std::uint64_t>("layer_in");
    s[1] = r.get<std::uint64_t>("layer_out");
  }
  for (std::size_t i = 1; i < shapes.size(); ++i) {
    if (shapes[i][0] != shapes[i - 1][1]) throw ParseError(r.offset(), "layer_in", "layer widths do not chain");
  }
  const auto k = r.get<std::uint64_t>("num_classes");
  const auto temperature = r.get<double>("temperature");
  if (!(temperature > 0.0)) throw ParseError(r.offset() - sizeof(double), "temperature", "must be > 0");
  const auto normalized = r.get<std::uint8_t>("normalized");

  Con2daModel model;
  for (const auto& s : shapes) {
    Tensor w = read_tensor(r, {s[0], s[1]}, "weight");
    Tensor b = read_tensor(r, {s[1]}, "bias");
    model.extractor.layers.push_back({std::move(w), std::move(b)});
  }
  model.classifier.prototypes = read_tensor(r, {shapes.back()[1], k}, "prototypes");
  model.classifier.temperature = temperature;
  model.classifier.normalized = normalized != 0;
  if (r.remaining() != 0) throw ParseError(r.offset(), "trailer", "trailing bytes");
  return model;
}

}  // namespace con2da
