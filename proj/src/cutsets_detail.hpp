#pragma once

#include "mbsa/cutsets.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mbsa::cutsets::detail
{

inline constexpr std::uint64_t monte_carlo_chunk_size = 1U << 16;

/// Masks of popcount k over `fault_count` bits in increasing order, minus
/// supersets of `confirmed` (counted into `pruned`).
std::vector< CutSet > layer_candidates( std::size_t fault_count, std::size_t k, const std::vector< CutSet >& confirmed,
                                        std::size_t& pruned );

void check_fault_limit( const SystemModel& m );

std::uint64_t monte_carlo_chunk( const std::vector< std::uint64_t >& sets, const std::vector< double >& prob,
                                 std::uint64_t seed, std::uint64_t chunk, std::uint64_t n );

MonteCarloEstimate finish_estimate( std::uint64_t hits, std::uint64_t samples );

std::pair< std::vector< std::uint64_t >, std::vector< double > > indexed( const std::vector< std::vector< std::string > >& mcs,
                                                                          const BasicEventProbabilities& p );

} // namespace mbsa::cutsets::detail
