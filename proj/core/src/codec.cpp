#include "qce/codec.hpp"

#include <bit>
#include <cfenv>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "qce/errors.hpp"

namespace qce {

namespace {

constexpr double kCodebookBitGuard = 28.0;
constexpr double kMaxGridInteger = 4.0e18;

void check_positive(std::uint64_t n) {
  if (n == 0) {
    throw QceError(ErrorCode::kZeroOrNegative,
                   "Elias Gamma encodes positive integers only");
  }
}

double round_half_even(double v) {
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(v);
  std::fesetround(saved);
  return r;
}

}  // namespace

int eg_length(std::uint64_t n) {
  check_positive(n);
  return 2 * (std::bit_width(n) - 1) + 1;
}

void eg_encode(std::uint64_t n, BitStream& out) {
  check_positive(n);
  const int nbits = std::bit_width(n);
  for (int i = 0; i < nbits - 1; ++i) out.push(false);
  out.append_uint(n, nbits);
}

BitStream eg_encode(std::uint64_t n) {
  BitStream out;
  eg_encode(n, out);
  return out;
}

std::uint64_t eg_decode(BitReader& in) {
  int zeros = 0;
  while (!in.read_bit()) {
    if (++zeros > 63) {
      throw QceError(ErrorCode::kTruncatedStream,
                     "Elias Gamma prefix longer than 63 bits");
    }
  }
  std::uint64_t v = 1;
  for (int i = 0; i < zeros; ++i) v = (v << 1) | (in.read_bit() ? 1u : 0u);
  return v;
}

std::uint64_t zigzag(std::int64_t z) {
  return z >= 0 ? 2 * static_cast<std::uint64_t>(z)
                : 2 * static_cast<std::uint64_t>(-(z + 1)) + 1;
}

std::int64_t unzigzag(std::uint64_t u) {
  return (u & 1u) ? -static_cast<std::int64_t>(u >> 1) - 1
                  : static_cast<std::int64_t>(u >> 1);
}

int signed_eg_length(std::int64_t z) { return eg_length(zigzag(z) + 1); }

void signed_eg_encode(std::int64_t z, BitStream& out) {
  eg_encode(zigzag(z) + 1, out);
}

BitStream signed_eg_encode(std::int64_t z) {
  BitStream out;
  signed_eg_encode(z, out);
  return out;
}

std::int64_t signed_eg_decode(BitReader& in) {
  return unzigzag(eg_decode(in) - 1);
}

InitResult absolute_init(const VectorXd& theta, double eps_target) {
  if (!(eps_target > 0.0) || !std::isfinite(eps_target)) {
    throw QceError(ErrorCode::kInvalidArgument, "eps_target must be positive");
  }
  const double ds = static_cast<double>(theta.size());
  const double delta_max = 2.0 * eps_target / std::sqrt(std::max(ds, 1.0));
  int E = static_cast<int>(std::ceil(std::log2(1.0 / delta_max)));
  if (E < 1) E = 1;
  while (std::ldexp(1.0, -E) > delta_max) ++E;

  InitResult res;
  res.msg.exponent = E;
  res.msg.z.resize(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double scaled = std::ldexp(theta(i), E);
    if (!std::isfinite(scaled) || std::abs(scaled) > kMaxGridInteger) {
      throw QceError(ErrorCode::kOverflow, "grid index exceeds 64 bits");
    }
    res.msg.z[i] = static_cast<std::int64_t>(round_half_even(scaled));
  }
  res.reconstruction = reconstruct_init(res.msg);
  return res;
}

VectorXd reconstruct_init(const InitMessage& msg) {
  VectorXd v(static_cast<Eigen::Index>(msg.z.size()));
  for (std::size_t i = 0; i < msg.z.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        std::ldexp(static_cast<double>(msg.z[i]), -msg.exponent);
  }
  return v;
}

bool codebook_feasible(int ds, double rho) {
  if (ds < 1 || !(rho > 0.0)) return false;
  const double per_dim =
      std::log2(1.0 + std::ceil(2.0 * std::sqrt(double(ds)) / (2.0 * rho)));
  return ds * per_dim <= kCodebookBitGuard;
}

CodebookConfig build_codebook(int ds, double rho) {
  if (!(rho > 0.0 && rho < std::sqrt(0.5))) {
    throw QceError(ErrorCode::kRhoOutOfRange, "rho must lie in (0, 1/sqrt 2)");
  }
  if (!codebook_feasible(ds, rho)) {
    throw QceError(ErrorCode::kInfeasible,
                   "lattice codebook too large for ds=" + std::to_string(ds));
  }
  const double g = 2.0 * rho / std::sqrt(double(ds));
  const int R = static_cast<int>(std::floor(1.0 / g + 0.5));

  std::vector<VectorXd> points;
  std::set<std::vector<long long>> seen;
  std::vector<int> n(ds, -R);
  VectorXd p(ds);
  for (;;) {
    double dist_sq = 0.0;
    for (int i = 0; i < ds; ++i) {
      p(i) = g * n[i];
      const double gap = std::abs(p(i)) - 0.5 * g;
      if (gap > 0.0) dist_sq += gap * gap;
    }
    if (dist_sq <= 1.0) {
      const double norm = p.norm();
      VectorXd c = norm > 1.0 ? VectorXd(p / norm) : p;
      std::vector<long long> key(ds);
      for (int i = 0; i < ds; ++i) key[i] = std::llround(c(i) * 1e9);
      if (seen.insert(key).second) points.push_back(c);
    }
    int i = ds - 1;
    while (i >= 0 && n[i] == R) n[i--] = -R;
    if (i < 0) break;
    ++n[i];
  }

  CodebookConfig cb;
  cb.rho = rho;
  cb.dim = ds;
  cb.spacing = g;
  cb.codewords.resize(ds, static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    cb.codewords.col(static_cast<Eigen::Index>(j)) = points[j];
  }
  cb.index_bits = points.size() <= 1
                      ? 0
                      : std::bit_width(points.size() - 1);
  return cb;
}

QuantizeResult quantize_innovation(const VectorXd& delta, double s,
                                   const CodebookConfig& cb) {
  if (delta.size() != cb.dim) {
    throw QceError(ErrorCode::kDimensionMismatch, "innovation dimension");
  }
  if (!(s > 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "scale must be positive");
  }
  if (delta.norm() > s * (1.0 + 1e-12)) {
    throw QceError(ErrorCode::kOverflow, "innovation exceeds the scale");
  }
  const VectorXd v = delta / s;
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < cb.codewords.cols(); ++j) {
    const double d = (cb.codewords.col(j) - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return {static_cast<std::uint64_t>(best), s * cb.codewords.col(best)};
}

std::uint64_t adaptive_multiplier(double delta_norm, double s_base) {
  if (!(s_base > 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "s_base must be positive");
  }
  const double ratio = delta_norm / s_base;
  if (!(ratio > 1.0)) return 1;
  auto m = static_cast<std::uint64_t>(std::ceil(ratio));
  while (static_cast<double>(m) * s_base < delta_norm) ++m;
  return m;
}

CoordResult coord_quantize(const VectorXd& delta, std::int64_t tau,
                           int index_offset) {
  if (tau < 1) {
    throw QceError(ErrorCode::kInvalidArgument, "tau must be >= 1");
  }
  const double root = std::sqrt(static_cast<double>(tau));
  CoordResult res;
  res.msg.negative.resize(delta.size());
  res.msg.index.resize(delta.size());
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    auto idx = static_cast<std::uint64_t>(std::ceil(std::abs(delta(i)) * root));
    if (index_offset == 0 && idx == 0) idx = 1;
    res.msg.negative[i] = delta(i) < 0.0;
    res.msg.index[i] = idx;
  }
  res.reconstruction = reconstruct_coord(res.msg, tau);
  return res;
}

VectorXd reconstruct_coord(const CoordTrackMessage& msg, std::int64_t tau) {
  const double root = std::sqrt(static_cast<double>(tau));
  VectorXd v(static_cast<Eigen::Index>(msg.index.size()));
  for (std::size_t i = 0; i < msg.index.size(); ++i) {
    const double mag =
        std::max(0.0, static_cast<double>(msg.index[i]) - 0.5) / root;
    v(static_cast<Eigen::Index>(i)) = msg.negative[i] ? -mag : mag;
  }
  return v;
}

MessageKind kind_of(const UplinkMessage& msg) {
  return static_cast<MessageKind>(msg.index());
}

void encode_message(const UplinkMessage& msg, const WireFormat& wire,
                    BitStream& out) {
  switch (kind_of(msg)) {
    case MessageKind::kSafeFlag:
      out.push(std::get<SafeFlag>(msg).safe);
      break;
    case MessageKind::kInit: {
      const auto& m = std::get<InitMessage>(msg);
      eg_encode(static_cast<std::uint64_t>(m.exponent), out);
      for (std::int64_t z : m.z) signed_eg_encode(z, out);
      break;
    }
    case MessageKind::kTrack: {
      const auto& m = std::get<TrackMessage>(msg);
      eg_encode(m.multiplier, out);
      out.append_uint(m.index, wire.index_bits);
      break;
    }
    case MessageKind::kCoordTrack: {
      const auto& m = std::get<CoordTrackMessage>(msg);
      for (std::size_t i = 0; i < m.index.size(); ++i) {
        out.push(m.negative[i]);
        eg_encode(m.index[i] + wire.coord_index_offset, out);
      }
      break;
    }
    case MessageKind::kRawTheta: {
      const auto& m = std::get<RawThetaMessage>(msg);
      for (Eigen::Index i = 0; i < m.theta.size(); ++i) {
        out.append_uint(std::bit_cast<std::uint64_t>(m.theta(i)), 64);
      }
      break;
    }
  }
}

UplinkMessage decode_message(BitReader& in, MessageKind kind,
                             const WireFormat& wire) {
  switch (kind) {
    case MessageKind::kSafeFlag:
      return SafeFlag{in.read_bit()};
    case MessageKind::kInit: {
      InitMessage m;
      m.exponent = static_cast<int>(eg_decode(in));
      m.z.resize(wire.ds);
      for (int i = 0; i < wire.ds; ++i) m.z[i] = signed_eg_decode(in);
      return m;
    }
    case MessageKind::kTrack: {
      TrackMessage m;
      m.multiplier = eg_decode(in);
      m.index = in.read_uint(wire.index_bits);
      return m;
    }
    case MessageKind::kCoordTrack: {
      CoordTrackMessage m;
      m.negative.resize(wire.ds);
      m.index.resize(wire.ds);
      for (int i = 0; i < wire.ds; ++i) {
        m.negative[i] = in.read_bit();
        m.index[i] = eg_decode(in) - wire.coord_index_offset;
      }
      return m;
    }
    case MessageKind::kRawTheta: {
      RawThetaMessage m;
      m.theta.resize(wire.ds);
      for (int i = 0; i < wire.ds; ++i) {
        m.theta(i) = std::bit_cast<double>(in.read_uint(64));
      }
      return m;
    }
  }
  throw QceError(ErrorCode::kInvalidArgument, "unknown message kind");
}

std::size_t message_cost(const UplinkMessage& msg, const WireFormat& wire) {
  switch (kind_of(msg)) {
    case MessageKind::kSafeFlag:
      return 1;
    case MessageKind::kInit: {
      const auto& m = std::get<InitMessage>(msg);
      std::size_t bits = eg_length(static_cast<std::uint64_t>(m.exponent));
      for (std::int64_t z : m.z) bits += signed_eg_length(z);
      return bits;
    }
    case MessageKind::kTrack: {
      const auto& m = std::get<TrackMessage>(msg);
      return static_cast<std::size_t>(2 * (std::bit_width(m.multiplier) - 1) + 1 +
                                      wire.index_bits);
    }
    case MessageKind::kCoordTrack: {
      const auto& m = std::get<CoordTrackMessage>(msg);
      std::size_t bits = 0;
      for (std::uint64_t idx : m.index) {
        bits += 1 + eg_length(idx + wire.coord_index_offset);
      }
      return bits;
    }
    case MessageKind::kRawTheta:
      return 64 * static_cast<std::size_t>(wire.ds);
  }
  return 0;
}

}  // namespace qce
