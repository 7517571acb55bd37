#include "dspr/unet.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "binary_io.hpp"

namespace dspr {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

Index encoder_depth(const UNetSpec& spec) { return static_cast<Index>(spec.encoder_filters.size()); }

// Channel count of the encoder feature the decoder stage j (1-based) adds in,
// or 0 when the stage has no skip (full resolution).
Index skip_channels(const UNetSpec& spec, Index j) {
  const Index level = encoder_depth(spec) - j;
  return level >= 1 ? spec.encoder_filters[static_cast<std::size_t>(level - 1)] : 0;
}

template <typename Scalar>
Tensor4<Scalar> he_normal(Shape4 shape, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(shape.c * shape.h * shape.w);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  Tensor4<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Tensor4<Scalar> channel_vector(Index c, Scalar fill) {
  return Tensor4<Scalar>(Shape4{1, c, 1, 1}, fill);
}

// Walks the parameter list in build order.
class ParamCursor {
 public:
  explicit ParamCursor(std::span<const Var> params) : params_(params) {}
  Var next() {
    if (pos_ >= params_.size()) throw ShapeError("forward: parameter list shorter than the spec requires");
    return params_[pos_++];
  }
  bool done() const { return pos_ == params_.size(); }

 private:
  std::span<const Var> params_;
  std::size_t pos_ = 0;
};

template <typename Scalar>
Var conv_bn_act(Tape<Scalar>& tape, ParamCursor& cur, Var x, int stride, Scalar slope) {
  const Var w = cur.next();
  const Var gamma = cur.next();
  const Var beta = cur.next();
  Var y = conv2d(tape, x, w, std::nullopt, stride);
  y = batch_norm(tape, y, gamma, beta, Scalar(1e-5));
  return leaky_relu(tape, y, slope);
}

}  // namespace

void UNetSpec::validate() const {
  if (encoder_filters.empty() || encoder_filters.size() != decoder_filters.size())
    throw ParameterError("UNetSpec: encoder and decoder need the same non-zero number of stages");
  for (Index f : encoder_filters)
    if (f < 1) throw ParameterError("UNetSpec: filter counts must be >= 1");
  for (Index f : decoder_filters)
    if (f < 1) throw ParameterError("UNetSpec: filter counts must be >= 1");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw ParameterError("UNetSpec: leaky slope must lie in [0, 1)");
  if (input_channels < 1 || output_channels < 1)
    throw ParameterError("UNetSpec: channel counts must be >= 1");
  if (encoder_filters.size() > 16) throw ParameterError("UNetSpec: too many stages");
}

StageId StageId::parse(const std::string& name) {
  if (name.size() >= 2 && (name[0] == 'e' || name[0] == 'd')) {
    const std::string digits = name.substr(1);
    if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos &&
        digits.size() <= 2) {
      const int idx = std::stoi(digits);
      if (idx >= 1 && idx <= 5) return StageId{name[0] == 'd', idx};
    }
  }
  throw ParameterError("unknown stage id '" + name + "' (expected e1..e5 or d1..d5)");
}

std::string StageId::name() const { return (decoder ? "d" : "e") + std::to_string(index); }

template <typename Scalar>
Index NetworkParameters<Scalar>::count() const {
  Index total = 0;
  for (const auto& t : tensors) total += t.value.size();
  return total;
}

template <typename Scalar>
NetworkParameters<Scalar> build_unet(const UNetSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  NetworkParameters<Scalar> p;
  p.spec = spec;
  auto push = [&p](std::string name, std::string stage, Tensor4<Scalar> value) {
    p.tensors.push_back({std::move(name), std::move(stage), std::move(value)});
  };
  auto conv_block = [&](const std::string& stage, const std::string& prefix, Index in_c,
                        Index out_c) {
    push(stage + "." + prefix + ".weight", stage, he_normal<Scalar>({out_c, in_c, 3, 3}, rng));
    push(stage + "." + prefix + "_bn.gamma", stage, channel_vector<Scalar>(out_c, Scalar(1)));
    push(stage + "." + prefix + "_bn.beta", stage, channel_vector<Scalar>(out_c, Scalar(0)));
  };

  const Index depth = encoder_depth(spec);
  Index ch = spec.input_channels;
  for (Index k = 1; k <= depth; ++k) {
    const std::string stage = "e" + std::to_string(k);
    const Index f = spec.encoder_filters[static_cast<std::size_t>(k - 1)];
    conv_block(stage, "conv", ch, f);
    conv_block(stage, "down", f, f);
    ch = f;
  }
  for (Index j = 1; j <= depth; ++j) {
    const std::string stage = "d" + std::to_string(j);
    const Index f = spec.decoder_filters[static_cast<std::size_t>(j - 1)];
    conv_block(stage, "conv", ch, f);
    const Index sc = skip_channels(spec, j);
    if (sc != 0 && sc != f) push(stage + ".skip.weight", stage, he_normal<Scalar>({f, sc, 1, 1}, rng));
    ch = f;
  }
  push("head.weight", "head", he_normal<Scalar>({spec.output_channels, ch, 3, 3}, rng));
  push("head.bias", "head", channel_vector<Scalar>(spec.output_channels, Scalar(0)));
  return p;
}

template <typename Scalar>
std::vector<Var> bind_parameters(Tape<Scalar>& tape, const NetworkParameters<Scalar>& params,
                                 bool requires_grad) {
  std::vector<Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) vars.push_back(tape.leaf(t.value, requires_grad));
  return vars;
}

template <typename Scalar>
Var forward(Tape<Scalar>& tape, const UNetSpec& spec, std::span<const Var> params, Var z,
            std::vector<Var>* stage_outputs) {
  spec.validate();
  const Shape4 zs = tape.value(z).shape();
  if (zs.n != 1 || zs.c != spec.input_channels) {
    std::ostringstream os;
    os << "forward: input must be (1, " << spec.input_channels << ", H, W), got " << zs;
    throw ShapeError(os.str());
  }
  const Index gran = spec.granularity();
  if (zs.h < gran || zs.w < gran) {
    std::ostringstream os;
    os << "forward: input " << zs.h << "x" << zs.w << " is smaller than the minimum " << gran << "x"
       << gran;
    throw ShapeError(os.str());
  }
  const Index ph = (zs.h + gran - 1) / gran * gran;
  const Index pw = (zs.w + gran - 1) / gran * gran;
  Var x = z;
  if (ph != zs.h || pw != zs.w) x = tape.leaf(pad_bottom_right(tape.value(z), ph, pw), false);

  const Scalar slope = static_cast<Scalar>(spec.leaky_slope);
  const Index depth = encoder_depth(spec);
  ParamCursor cur(params);
  std::vector<Var> skips;
  std::vector<Var> stages;
  for (Index k = 1; k <= depth; ++k) {
    x = conv_bn_act(tape, cur, x, 1, slope);
    x = conv_bn_act(tape, cur, x, 2, slope);
    skips.push_back(x);
    stages.push_back(x);
  }
  for (Index j = 1; j <= depth; ++j) {
    x = upsample_bilinear2x(tape, x);
    x = conv_bn_act(tape, cur, x, 1, slope);
    const Index f = spec.decoder_filters[static_cast<std::size_t>(j - 1)];
    const Index sc = skip_channels(spec, j);
    if (sc != 0) {
      Var s = skips[static_cast<std::size_t>(depth - j - 1)];
      if (sc != f) s = conv2d(tape, s, cur.next(), std::nullopt, 1);
      x = add(tape, x, s);
    }
    stages.push_back(x);
  }
  const Var hw = cur.next();
  const Var hb = cur.next();
  if (!cur.done()) throw ShapeError("forward: parameter list longer than the spec requires");
  x = conv2d(tape, x, hw, hb, 1);
  x = sigmoid(tape, x);
  if (ph != zs.h || pw != zs.w) x = crop(tape, x, zs.h, zs.w);
  if (stage_outputs) *stage_outputs = std::move(stages);
  return x;
}

template <typename Scalar>
Tensor4<Scalar> forward(const NetworkParameters<Scalar>& params, const Tensor4<Scalar>& z) {
  Tape<Scalar> tape;
  const auto vars = bind_parameters(tape, params, false);
  const Var zv = tape.leaf(z, false);
  return tape.value(forward(tape, params.spec, vars, zv));
}

template <typename Scalar>
std::vector<Tensor4<Scalar>> capture_activations(const NetworkParameters<Scalar>& params,
                                                 const Tensor4<Scalar>& z,
                                                 const std::vector<std::string>& taps) {
  std::vector<StageId> ids;
  for (const auto& t : taps) ids.push_back(StageId::parse(t));
  if (ids.empty()) return {};
  const Index depth = encoder_depth(params.spec);
  for (const auto& id : ids)
    if (id.index > depth) throw ParameterError("stage " + id.name() + " exceeds network depth");

  Tape<Scalar> tape;
  const auto vars = bind_parameters(tape, params, false);
  const Var zv = tape.leaf(z, false);
  std::vector<Var> stages;
  forward(tape, params.spec, vars, zv, &stages);
  std::vector<Tensor4<Scalar>> out;
  for (const auto& id : ids) {
    const Index pos = (id.decoder ? depth : 0) + id.index - 1;
    out.push_back(tape.value(stages[static_cast<std::size_t>(pos)]));
  }
  return out;
}

template <typename Scalar>
void save_checkpoint(const NetworkParameters<Scalar>& params, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes("UNET");
  w.u32(kCheckpointVersion);
  const auto& s = params.spec;
  w.u32(static_cast<std::uint32_t>(s.encoder_filters.size()));
  for (Index f : s.encoder_filters) w.u32(static_cast<std::uint32_t>(f));
  w.u32(static_cast<std::uint32_t>(s.decoder_filters.size()));
  for (Index f : s.decoder_filters) w.u32(static_cast<std::uint32_t>(f));
  w.f64(s.leaky_slope);
  w.u32(static_cast<std::uint32_t>(s.input_channels));
  w.u32(static_cast<std::uint32_t>(s.output_channels));
  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    const Shape4 sh = t.value.shape();
    w.u32(4);
    for (Index d : {sh.n, sh.c, sh.h, sh.w}) w.u32(static_cast<std::uint32_t>(d));
    for (Index i = 0; i < t.value.size(); ++i) w.f32(static_cast<float>(t.value.data()[i]));
  }
  detail::write_file_atomic(path, w.buffer());
}

template <typename Scalar>
NetworkParameters<Scalar> load_checkpoint(const std::filesystem::path& path) {
  const std::string raw = detail::read_file(path);
  detail::ByteReader r(raw);
  if (r.bytes(4) != "UNET") throw ParseError(ParseError::Kind::Magic, "not a UNET checkpoint: " + path.string());
  if (r.u32() != kCheckpointVersion)
    throw ParseError(ParseError::Kind::Header, "unsupported checkpoint version");
  UNetSpec spec;
  spec.encoder_filters.resize(r.u32());
  for (auto& f : spec.encoder_filters) f = r.u32();
  spec.decoder_filters.resize(r.u32());
  for (auto& f : spec.decoder_filters) f = r.u32();
  spec.leaky_slope = r.f64();
  spec.input_channels = r.u32();
  spec.output_channels = r.u32();
  spec.validate();

  // The spec fixes names, stages and shapes; the file supplies the values.
  NetworkParameters<Scalar> params = build_unet<Scalar>(spec, 0);
  if (r.u32() != params.tensors.size())
    throw ParseError(ParseError::Kind::Header, "checkpoint tensor count does not match its spec");
  for (auto& t : params.tensors) {
    if (r.u32() != 4) throw ParseError(ParseError::Kind::Header, "checkpoint tensors must be rank 4");
    Shape4 sh;
    sh.n = r.u32();
    sh.c = r.u32();
    sh.h = r.u32();
    sh.w = r.u32();
    if (!(sh == t.value.shape()))
      throw ParseError(ParseError::Kind::Header, "checkpoint tensor " + t.name + " has the wrong shape");
    for (Index i = 0; i < t.value.size(); ++i) {
      const float v = r.f32();
      if (!std::isfinite(v)) throw ParseError(ParseError::Kind::NonFinite, "non-finite checkpoint value");
      t.value.data()[i] = static_cast<Scalar>(v);
    }
  }
  if (r.remaining() != 0) throw ParseError(ParseError::Kind::SampleCount, "trailing bytes in checkpoint");
  return params;
}

#define DSPR_INSTANTIATE_UNET(S)                                                               \
  template struct NetworkParameters<S>;                                                        \
  template NetworkParameters<S> build_unet<S>(const UNetSpec&, std::uint64_t);                 \
  template std::vector<Var> bind_parameters<S>(Tape<S>&, const NetworkParameters<S>&, bool);  \
  template Var forward<S>(Tape<S>&, const UNetSpec&, std::span<const Var>, Var,                \
                          std::vector<Var>*);                                                  \
  template Tensor4<S> forward<S>(const NetworkParameters<S>&, const Tensor4<S>&);              \
  template std::vector<Tensor4<S>> capture_activations<S>(                                     \
      const NetworkParameters<S>&, const Tensor4<S>&, const std::vector<std::string>&);        \
  template void save_checkpoint<S>(const NetworkParameters<S>&, const std::filesystem::path&); \
  template NetworkParameters<S> load_checkpoint<S>(const std::filesystem::path&);

DSPR_INSTANTIATE_UNET(float)
DSPR_INSTANTIATE_UNET(double)

}  // namespace dspr
