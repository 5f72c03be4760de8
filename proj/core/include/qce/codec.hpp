#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "qce/bitstream.hpp"
#include "qce/control_math.hpp"

namespace qce {

// Elias Gamma: floor(log2 n) zeros followed by n in binary.
int eg_length(std::uint64_t n);
void eg_encode(std::uint64_t n, BitStream& out);
BitStream eg_encode(std::uint64_t n);
std::uint64_t eg_decode(BitReader& in);

// 0,-1,1,-2,2,... -> 0,1,2,3,4,...
std::uint64_t zigzag(std::int64_t z);
std::int64_t unzigzag(std::uint64_t u);

// eg(zigzag(z) + 1).
int signed_eg_length(std::int64_t z);
void signed_eg_encode(std::int64_t z, BitStream& out);
BitStream signed_eg_encode(std::int64_t z);
std::int64_t signed_eg_decode(BitReader& in);

struct InitMessage {
  int exponent = 1;  // grid step 2^-exponent
  std::vector<std::int64_t> z;

  bool operator==(const InitMessage&) const = default;
};

struct InitResult {
  InitMessage msg;
  VectorXd reconstruction;
};

// Dyadic grid rounding with ||reconstruction - theta|| <= eps_target.
InitResult absolute_init(const VectorXd& theta, double eps_target);
VectorXd reconstruct_init(const InitMessage& msg);

struct CodebookConfig {
  double rho = 0.5;
  int dim = 0;
  double spacing = 0.0;
  MatrixXd codewords;  // dim x size
  int index_bits = 0;

  std::size_t size() const { return static_cast<std::size_t>(codewords.cols()); }
};

// dim * log2(1 + ceil(2 sqrt(dim) / (2 rho))) <= 28.
bool codebook_feasible(int ds, double rho);

// Integer lattice with spacing 2 rho / sqrt(ds). Every lattice cell that meets
// the unit ball contributes its centre, pulled radially onto the ball when it
// lies outside. Throws kInfeasible, kRhoOutOfRange.
CodebookConfig build_codebook(int ds, double rho);

struct QuantizeResult {
  std::uint64_t index = 0;
  VectorXd reconstruction;
};

// Nearest scaled codeword s*c, ties to the lowest index. Throws kOverflow
// when ||delta|| > s.
QuantizeResult quantize_innovation(const VectorXd& delta, double s,
                                   const CodebookConfig& cb);

// max(1, ceil(delta_norm / s_base)).
std::uint64_t adaptive_multiplier(double delta_norm, double s_base);

struct CoordTrackMessage {
  std::vector<bool> negative;
  std::vector<std::uint64_t> index;

  bool operator==(const CoordTrackMessage&) const = default;
};

struct CoordResult {
  CoordTrackMessage msg;
  VectorXd reconstruction;
};

// index_i = ceil(|delta_i| sqrt(tau)). With offset 0 the index is floored at 1
// and sent as eg(index); with offset 1 it is sent as eg(index + 1) so that 0
// is representable. Reconstruction sits at the cell midpoint.
CoordResult coord_quantize(const VectorXd& delta, std::int64_t tau,
                           int index_offset = 0);
VectorXd reconstruct_coord(const CoordTrackMessage& msg, std::int64_t tau);

struct SafeFlag {
  bool safe = false;
  bool operator==(const SafeFlag&) const = default;
};

struct TrackMessage {
  std::uint64_t multiplier = 1;
  std::uint64_t index = 0;
  bool operator==(const TrackMessage&) const = default;
};

// Full-precision parameter vector, 64 bits per coordinate. Used by the
// unquantized baseline only.
struct RawThetaMessage {
  VectorXd theta;
  bool operator==(const RawThetaMessage& o) const {
    return theta.size() == o.theta.size() && theta == o.theta;
  }
};

using UplinkMessage = std::variant<SafeFlag, InitMessage, TrackMessage,
                                   CoordTrackMessage, RawThetaMessage>;

enum class MessageKind { kSafeFlag, kInit, kTrack, kCoordTrack, kRawTheta };

struct WireFormat {
  int ds = 0;
  int index_bits = 0;
  int coord_index_offset = 0;
};

MessageKind kind_of(const UplinkMessage& msg);
void encode_message(const UplinkMessage& msg, const WireFormat& wire,
                    BitStream& out);
UplinkMessage decode_message(BitReader& in, MessageKind kind,
                             const WireFormat& wire);
// Bit count from the closed-form cost of each message type.
std::size_t message_cost(const UplinkMessage& msg, const WireFormat& wire);

}  // namespace qce
