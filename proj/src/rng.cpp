#include "semloop/rng.hpp"

#include <algorithm>

#include "semloop/error.hpp"

namespace semloop {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DegenerateVocabulary: return "DegenerateVocabulary";
    case ErrorCode::InvalidMixture: return "InvalidMixture";
    case ErrorCode::SingleClassTrainSet: return "SingleClassTrainSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::NoActiveTopics: return "NoActiveTopics";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::DegenerateMixture: return "DegenerateMixture";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllLocalGsEmpty: return "AllLocalGsEmpty";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Rng::below(0)");
  const std::uint64_t bound = n;
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return static_cast<std::size_t>(draw % bound);
}

std::size_t Rng::categorical(std::span<const double> weights, double total) {
  double target = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return i;
  }
  // Rounding fallthrough: last index with positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

std::size_t Rng::from_cdf(std::span<const double> cdf) {
  const double target = uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> parts) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = splitmix(base);
  for (auto p : parts) h = splitmix(h ^ splitmix(p));
  return h;
}

}  // namespace semloop
