#pragma once

#include "mbsa/tfpg.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mbsa::tfpg::detail
{

inline constexpr int never = -1;

struct CompiledEdge
{
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    unsigned tmin = 0;
    unsigned tmax = infinity;
    std::uint64_t modes = 0;
};

/// Index-based view of a graph: nodes in name order, modes in declaration order.
struct Compiled
{
    std::vector< std::string > names;
    std::vector< NodeKind > kinds;
    std::vector< CompiledEdge > edges;
    std::vector< std::vector< std::uint32_t > > incoming;  // edge indices per node
    std::vector< std::string > modes;

    explicit Compiled( const Tfpg& g );

    [[nodiscard]] std::size_t node_index( const std::string& name ) const;
    [[nodiscard]] std::size_t mode_index( const std::string& name ) const;
};

/// Clock of edge e at every step 0..H (-1 while stopped).
void edge_clock( const CompiledEdge& e, std::span< const int > act, std::span< const std::uint8_t > modes,
                 std::vector< int >& out );

/// Semantic check on index form; with `out` null it stops at the first violation.
bool check( const Compiled& c, std::span< const int > act, std::span< const std::uint8_t > modes,
            std::vector< TraceViolation >* out );

ActivationTrace to_trace( const Compiled& c, std::span< const int > act, std::span< const std::uint8_t > modes );

} // namespace mbsa::tfpg::detail
