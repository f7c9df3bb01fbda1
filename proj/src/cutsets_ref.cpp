// Sequential reference versions of the OpenMP kernels in cutsets.cpp.

#include "cutsets_detail.hpp"

#include <algorithm>

namespace mbsa::cutsets
{

std::vector< CutSetReport > enumerate_mcs_serial( const SystemModel& m, const Expr& tle )
{
    detail::check_fault_limit( m );
    const std::size_t nf = m.fault_atoms().size();
    std::vector< CutSetReport > reports;
    std::vector< CutSet > confirmed;
    std::size_t checks = 0;
    std::size_t pruned = 0;
    for ( std::size_t k = 0; k <= nf; ++k )
    {
        for ( auto c : detail::layer_candidates( nf, k, confirmed, pruned ) )
        {
            ++checks;
            if ( is_cut_set( m, tle, c ) )
                confirmed.push_back( c );
        }
        std::sort( confirmed.begin(), confirmed.end(), cardinality_order );
        CutSetReport r;
        r.completed_cardinality = k;
        r.lower_bound = confirmed;
        r.exhausted = ( k == nf );
        r.reachability_checks = checks;
        r.pruned_supersets = pruned;
        reports.push_back( std::move( r ) );
    }
    return reports;
}

MonteCarloEstimate estimate_probability_monte_carlo_serial( const std::vector< std::vector< std::string > >& mcs,
                                                            const BasicEventProbabilities& p, std::uint64_t samples,
                                                            std::uint64_t seed )
{
    auto [ sets, prob ] = detail::indexed( mcs, p );
    std::uint64_t hits = 0;
    for ( std::uint64_t begin = 0, chunk = 0; begin < samples; begin += detail::monte_carlo_chunk_size, ++chunk )
        hits += detail::monte_carlo_chunk( sets, prob, seed, chunk, std::min( detail::monte_carlo_chunk_size, samples - begin ) );
    return detail::finish_estimate( hits, samples );
}

} // namespace mbsa::cutsets
