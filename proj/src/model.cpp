#include "tane/model.hpp"

#include <fstream>

#include "tane/detail/binary_io.hpp"
#include "tane/error.hpp"
#include "tane/rng.hpp"

namespace tane {

namespace {

constexpr char kCheckpointMagic[5] = "TANE";
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Params, typename Fn>
void for_each_block(Params& p, Fn&& fn) {
  fn("calibration.key_novel", p.calibration.key_novel);
  fn("calibration.key_memory", p.calibration.key_memory);
  fn("calibration.residual", p.calibration.residual);
  fn("envision.key_novel", p.envision.key_novel);
  fn("envision.key_memory", p.envision.key_memory);
  fn("envision.generator.w1", p.envision.generator.w1);
  fn("envision.generator.b1", p.envision.generator.b1);
  fn("envision.generator.w2", p.envision.generator.w2);
  fn("envision.generator.b2", p.envision.generator.b2);
  fn("envision.mapping.w1", p.envision.mapping.w1);
  fn("envision.mapping.b1", p.envision.mapping.b1);
  fn("envision.mapping.w2", p.envision.mapping.w2);
  fn("envision.mapping.b2", p.envision.mapping.b2);
}

}  // namespace

ModelShape ModelShape::for_dim(std::size_t dim, std::size_t d_prime) {
  if (dim == 0) throw InvalidConfig("embedding dim must be positive");
  ModelShape s;
  s.dim = dim;
  s.d_prime = d_prime != 0 ? d_prime : std::max<std::size_t>(1, dim / 2);
  s.mapping_hidden = dim;
  return s;
}

ModelShape TaneParams::shape() const {
  return ModelShape{calibration.dim(), calibration.d_prime(), envision.generator.hidden(),
                    envision.mapping.hidden()};
}

void TaneParams::validate() const {
  calibration.validate();
  envision.validate();
  if (envision.dim() != calibration.dim()) throw ShapeError("envision/calibration dim mismatch");
  if (!std::isfinite(similarity.log_temperature)) throw NumericalError("non-finite temperature");
}

TaneParams TaneParams::initialize(const ModelShape& shape, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  TaneParams p;
  p.calibration = init_calibration(shape.dim, shape.d_prime, rng);
  p.envision = init_envision(shape.dim, shape.d_prime, shape.generator_hidden,
                             shape.mapping_hidden, rng);
  return p;
}

bool operator==(const TaneParams& a, const TaneParams& b) {
  return flatten(a) == flatten(b) && a.shape() == b.shape();
}

std::vector<ParamBlock> parameter_blocks(TaneParams& params) {
  std::vector<ParamBlock> out;
  for_each_block(params, [&](const char* name, Mat& m) { out.push_back({name, m.values()}); });
  out.push_back({"similarity.log_temperature", std::span<double>(&params.similarity.log_temperature, 1)});
  return out;
}

std::size_t parameter_count(const TaneParams& params) {
  std::size_t n = 1;
  for_each_block(params, [&](const char*, const Mat& m) { n += m.size(); });
  return n;
}

std::vector<double> flatten(const TaneParams& params) {
  std::vector<double> out;
  out.reserve(parameter_count(params));
  for_each_block(params, [&](const char*, const Mat& m) {
    out.insert(out.end(), m.values().begin(), m.values().end());
  });
  out.push_back(params.similarity.log_temperature);
  return out;
}

void unflatten(std::span<const double> flat, TaneParams& params) {
  if (flat.size() != parameter_count(params)) {
    throw ShapeError("flat parameter length " + std::to_string(flat.size()) + " != " +
                     std::to_string(parameter_count(params)));
  }
  std::size_t offset = 0;
  for (auto& block : parameter_blocks(params)) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), block.values.size(),
                block.values.begin());
    offset += block.values.size();
  }
}

std::string parameter_name(const TaneParams& params, std::size_t flat_index) {
  TaneParams copy = params;
  std::size_t offset = 0;
  for (const auto& block : parameter_blocks(copy)) {
    if (flat_index < offset + block.values.size()) {
      return block.name + "[" + std::to_string(flat_index - offset) + "]";
    }
    offset += block.values.size();
  }
  return "<out of range>";
}

TaneParams randomized_params(const ModelShape& shape, std::uint64_t seed, double scale) {
  TaneParams p = TaneParams::initialize(shape, seed);
  Rng rng(derive_seed(seed, "randomize"));
  for (auto& block : parameter_blocks(p)) {
    for (double& x : block.values) x = rng.uniform(-scale, scale);
  }
  p.similarity.log_temperature = std::log(10.0) + rng.uniform(-0.2, 0.2);
  return p;
}

std::vector<ad::Var> ParamVars::all() const {
  return {calibration.key_novel,     calibration.key_memory,   calibration.residual,
          envision.key_novel,        envision.key_memory,      envision.generator.w1,
          envision.generator.b1,     envision.generator.w2,    envision.generator.b2,
          envision.mapping.w1,       envision.mapping.b1,      envision.mapping.w2,
          envision.mapping.b2,       log_temperature};
}

ParamVars bind(ad::Tape& tape, const TaneParams& params, bool trainable) {
  params.validate();
  ParamVars v;
  v.calibration = bind(tape, params.calibration, trainable);
  v.envision = bind(tape, params.envision, trainable);
  const Mat tau(1, 1, params.similarity.log_temperature);
  v.log_temperature = trainable ? tape.variable(tau) : tape.constant(tau);
  return v;
}

std::vector<double> gradients(const ParamVars& vars) {
  std::vector<double> out;
  for (const auto& v : vars.all()) {
    const auto g = v.grad().values();
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

TaskPrototypes forward_prototypes(const ParamVars& vars, ad::Var naive, ad::Var memory,
                                  bool with_negative) {
  if (naive.cols() != vars.calibration.key_novel.rows()) {
    throw ShapeError("embedding dim " + std::to_string(naive.cols()) + " != model dim " +
                     std::to_string(vars.calibration.key_novel.rows()));
  }
  TaskPrototypes out;
  out.naive = naive;
  out.calibrated = calibrate(naive, memory, vars.calibration);
  if (with_negative) {
    auto w_n = negative_relation(out.calibrated, memory, vars.envision);
    auto w_neg = generate_negative_relation(w_n, vars.envision);
    out.negative = envision_negative(w_neg, memory, vars.envision);
    out.has_negative = true;
  }
  return out;
}

void save_checkpoint(const TaneParams& params, const std::filesystem::path& path) {
  params.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const ModelShape s = params.shape();
  out.write(kCheckpointMagic, 4);
  detail::write_uint<std::uint32_t>(out, kCheckpointVersion);
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.dim));
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.d_prime));
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.generator_hidden));
  detail::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(s.mapping_hidden));
  for (double v : flatten(params)) detail::write_f64(out, v);
  if (!out) throw Error("write failed for " + path.string());
}

TaneParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  detail::expect_magic(in, kCheckpointMagic);
  const auto version = detail::read_uint<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelShape s;
  s.dim = detail::read_uint<std::uint32_t>(in, "dim");
  s.d_prime = detail::read_uint<std::uint32_t>(in, "d_prime");
  s.generator_hidden = detail::read_uint<std::uint32_t>(in, "generator hidden");
  s.mapping_hidden = detail::read_uint<std::uint32_t>(in, "mapping hidden");
  if (s.dim == 0 || s.d_prime == 0 || s.generator_hidden < 2 || s.mapping_hidden == 0) {
    throw FormatError("invalid checkpoint dimensions");
  }
  TaneParams p = TaneParams::initialize(s, 0);
  std::vector<double> flat(parameter_count(p));
  for (double& v : flat) v = detail::read_f64(in, "parameter block");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
  unflatten(flat, p);
  p.validate();
  return p;
}

}  // namespace tane
