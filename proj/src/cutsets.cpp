#include "mbsa/cutsets.hpp"
#include "cutsets_detail.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mbsa::cutsets
{

bool is_cut_set( const SystemModel& m, const Expr& tle, CutSet faults )
{
    const std::size_t n = m.state_count();
    std::vector< char > seen( n, 0 );
    std::vector< StateId > queue;
    queue.reserve( n );
    for ( auto s : m.initial_states() )
        if ( ( m.fault_mask( s ) & ~faults ) == 0 && !seen[ s ] )
        {
            seen[ s ] = 1;
            queue.push_back( s );
        }
    for ( std::size_t head = 0; head < queue.size(); ++head )
    {
        StateId s = queue[ head ];
        if ( tle.evaluate( m.valuation( s ) ) )
            return true;
        for ( auto t : m.successors( s ) )
            if ( !seen[ t ] && ( m.fault_mask( t ) & ~faults ) == 0 )
            {
                seen[ t ] = 1;
                queue.push_back( t );
            }
    }
    return false;
}

bool cardinality_order( CutSet a, CutSet b )
{
    int ca = std::popcount( a );
    int cb = std::popcount( b );
    return ca != cb ? ca < cb : a < b;
}

namespace detail
{

std::vector< CutSet > layer_candidates( std::size_t fault_count, std::size_t k, const std::vector< CutSet >& confirmed,
                                        std::size_t& pruned )
{
    std::vector< CutSet > out;
    auto dominated = [ & ]( CutSet c ) {
        return std::any_of( confirmed.begin(), confirmed.end(), [ c ]( CutSet mcs ) { return ( mcs & ~c ) == 0; } );
    };
    if ( k == 0 )
    {
        if ( !dominated( 0 ) )
            out.push_back( 0 );
        else
            ++pruned;
        return out;
    }
    if ( k > fault_count )
        return out;
    // Gosper's hack: all masks of popcount k below 2^fault_count, increasing.
    // fault_count <= 30 is enforced by the callers.
    const CutSet end = CutSet{ 1 } << fault_count;
    for ( CutSet c = ( CutSet{ 1 } << k ) - 1; c < end; )
    {
        if ( dominated( c ) )
            ++pruned;
        else
            out.push_back( c );
        CutSet low = c & ( ~c + 1 );
        CutSet ripple = c + low;
        c = ( ( ( ripple ^ c ) >> 2 ) / low ) | ripple;
    }
    return out;
}

void check_fault_limit( const SystemModel& m )
{
    if ( m.fault_atoms().size() > 30 )
        throw CutSetError( "layered enumeration supports at most 30 fault atoms" );
}

} // namespace detail

std::vector< CutSetReport > enumerate_mcs( const SystemModel& m, const Expr& tle,
                                           const std::function< void( const CutSetReport& ) >& on_layer )
{
    detail::check_fault_limit( m );
    const std::size_t nf = m.fault_atoms().size();
    std::vector< CutSetReport > reports;
    std::vector< CutSet > confirmed;
    std::size_t checks = 0;
    std::size_t pruned = 0;
    for ( std::size_t k = 0; k <= nf; ++k )
    {
        auto candidates = detail::layer_candidates( nf, k, confirmed, pruned );
        std::vector< char > hit( candidates.size(), 0 );
        const auto count = static_cast< std::int64_t >( candidates.size() );
#pragma omp parallel for schedule( dynamic, 4 )
        for ( std::int64_t i = 0; i < count; ++i )
            hit[ static_cast< std::size_t >( i ) ] = is_cut_set( m, tle, candidates[ static_cast< std::size_t >( i ) ] ) ? 1 : 0;
        checks += candidates.size();
        // Candidates are generated in increasing mask order, so the merge is
        // deterministic regardless of the schedule.
        for ( std::size_t i = 0; i < candidates.size(); ++i )
            if ( hit[ i ] )
                confirmed.push_back( candidates[ i ] );
        std::sort( confirmed.begin(), confirmed.end(), cardinality_order );

        CutSetReport r;
        r.completed_cardinality = k;
        r.lower_bound = confirmed;
        r.exhausted = ( k == nf );
        r.reachability_checks = checks;
        r.pruned_supersets = pruned;
        if ( on_layer )
            on_layer( r );
        reports.push_back( std::move( r ) );
    }
    return reports;
}

namespace
{

struct IndexedFamily
{
    std::vector< std::string > universe;  // sorted fault names
    std::vector< std::uint64_t > sets;    // masks over universe
    std::vector< double > prob;           // per universe entry
};

IndexedFamily index_family( const std::vector< std::vector< std::string > >& mcs, const BasicEventProbabilities& p )
{
    IndexedFamily f;
    std::set< std::string > names;
    for ( const auto& s : mcs )
        names.insert( s.begin(), s.end() );
    f.universe.assign( names.begin(), names.end() );
    if ( f.universe.size() > 62 )
        throw CutSetError( "too many distinct basic events" );
    for ( const auto& n : f.universe )
    {
        auto it = p.find( n );
        if ( it == p.end() )
            throw CutSetError( "missing probability for basic event '" + n + "'" );
        if ( !( it->second >= 0.0 && it->second <= 1.0 ) )
            throw CutSetError( "probability of '" + n + "' outside [0, 1]" );
        f.prob.push_back( it->second );
    }
    for ( const auto& s : mcs )
    {
        std::uint64_t mask = 0;
        for ( const auto& n : s )
            mask |= std::uint64_t{ 1 } << ( std::lower_bound( f.universe.begin(), f.universe.end(), n ) - f.universe.begin() );
        f.sets.push_back( mask );
    }
    return f;
}

bool any_contained( const std::vector< std::uint64_t >& sets, std::uint64_t occurred )
{
    return std::any_of( sets.begin(), sets.end(), [ occurred ]( std::uint64_t s ) { return ( s & ~occurred ) == 0; } );
}

constexpr std::size_t subset_sum_limit = 24;
constexpr std::size_t inclusion_exclusion_limit = 20;

double subsets_route( const IndexedFamily& f )
{
    if ( f.universe.size() > subset_sum_limit )
        throw CutSetError( "subset summation limited to " + std::to_string( subset_sum_limit ) + " basic events" );
    if ( f.sets.empty() )
        return 0.0;
    const std::uint64_t total = std::uint64_t{ 1 } << f.universe.size();
    double sum = 0.0;
    for ( std::uint64_t occ = 0; occ < total; ++occ )
    {
        if ( !any_contained( f.sets, occ ) )
            continue;
        double w = 1.0;
        for ( std::size_t i = 0; i < f.universe.size(); ++i )
            w *= ( occ >> i ) & 1U ? f.prob[ i ] : 1.0 - f.prob[ i ];
        sum += w;
    }
    return sum;
}

double product_over( const IndexedFamily& f, std::uint64_t mask )
{
    double w = 1.0;
    for ( std::size_t i = 0; i < f.universe.size(); ++i )
        if ( ( mask >> i ) & 1U )
            w *= f.prob[ i ];
    return w;
}

void ie_recurse( const IndexedFamily& f, std::size_t next, std::uint64_t un, std::size_t chosen, double& acc )
{
    for ( std::size_t i = next; i < f.sets.size(); ++i )
    {
        std::uint64_t u = un | f.sets[ i ];
        double term = product_over( f, u );
        acc += ( chosen % 2 == 0 ) ? term : -term;
        ie_recurse( f, i + 1, u, chosen + 1, acc );
    }
}

double inclusion_exclusion_route( const IndexedFamily& f )
{
    if ( f.sets.size() > inclusion_exclusion_limit )
        throw CutSetError( "inclusion-exclusion limited to " + std::to_string( inclusion_exclusion_limit ) + " cut sets" );
    double acc = 0.0;
    ie_recurse( f, 0, 0, 0, acc );
    return acc;
}

} // namespace

double probability_by_subsets( const std::vector< std::vector< std::string > >& mcs, const BasicEventProbabilities& p )
{
    return subsets_route( index_family( mcs, p ) );
}

double probability_by_inclusion_exclusion( const std::vector< std::vector< std::string > >& mcs,
                                           const BasicEventProbabilities& p )
{
    return inclusion_exclusion_route( index_family( mcs, p ) );
}

ProbabilityResult evaluate_probability( const std::vector< std::vector< std::string > >& mcs,
                                        const BasicEventProbabilities& p )
{
    for ( const auto& [ name, v ] : p )
        if ( !( v >= 0.0 && v <= 1.0 ) )
            throw CutSetError( "probability of '" + name + "' outside [0, 1]" );
    auto f = index_family( mcs, p );
    bool subsets_ok = f.universe.size() <= subset_sum_limit;
    bool ie_ok = f.sets.size() <= inclusion_exclusion_limit;
    ProbabilityResult r;
    if ( subsets_ok && ie_ok )
    {
        double a = subsets_route( f );
        double b = inclusion_exclusion_route( f );
        r.value = a;
        r.method = "both";
        r.cross_check_delta = std::abs( a - b );
    }
    else if ( subsets_ok )
    {
        r.value = subsets_route( f );
        r.method = "subsets";
    }
    else if ( ie_ok )
    {
        r.value = inclusion_exclusion_route( f );
        r.method = "inclusion-exclusion";
    }
    else
        throw CutSetError( "cut-set family too large for exact evaluation" );
    r.value = std::clamp( r.value, 0.0, 1.0 );
    return r;
}

namespace detail
{

std::uint64_t monte_carlo_chunk( const std::vector< std::uint64_t >& sets, const std::vector< double >& prob,
                                 std::uint64_t seed, std::uint64_t chunk, std::uint64_t n )
{
    std::seed_seq seq{ static_cast< std::uint32_t >( seed ), static_cast< std::uint32_t >( seed >> 32 ),
                       static_cast< std::uint32_t >( chunk ), static_cast< std::uint32_t >( chunk >> 32 ) };
    std::mt19937_64 rng( seq );
    std::uniform_real_distribution< double > u( 0.0, 1.0 );
    std::uint64_t hits = 0;
    for ( std::uint64_t i = 0; i < n; ++i )
    {
        std::uint64_t occ = 0;
        for ( std::size_t b = 0; b < prob.size(); ++b )
            if ( u( rng ) < prob[ b ] )
                occ |= std::uint64_t{ 1 } << b;
        hits += any_contained( sets, occ ) ? 1 : 0;
    }
    return hits;
}

MonteCarloEstimate finish_estimate( std::uint64_t hits, std::uint64_t samples )
{
    MonteCarloEstimate e;
    e.samples = samples;
    if ( samples == 0 )
        return e;
    e.mean = static_cast< double >( hits ) / static_cast< double >( samples );
    e.stddev = std::sqrt( e.mean * ( 1.0 - e.mean ) / static_cast< double >( samples ) );
    return e;
}

std::pair< std::vector< std::uint64_t >, std::vector< double > > indexed( const std::vector< std::vector< std::string > >& mcs,
                                                                          const BasicEventProbabilities& p )
{
    auto f = index_family( mcs, p );
    return { std::move( f.sets ), std::move( f.prob ) };
}

} // namespace detail

MonteCarloEstimate estimate_probability_monte_carlo( const std::vector< std::vector< std::string > >& mcs,
                                                     const BasicEventProbabilities& p, std::uint64_t samples,
                                                     std::uint64_t seed )
{
    auto [ sets, prob ] = detail::indexed( mcs, p );
    const std::uint64_t chunks = ( samples + detail::monte_carlo_chunk_size - 1 ) / detail::monte_carlo_chunk_size;
    std::uint64_t hits = 0;
    const auto nchunks = static_cast< std::int64_t >( chunks );
#pragma omp parallel for reduction( + : hits ) schedule( static )
    for ( std::int64_t c = 0; c < nchunks; ++c )
    {
        auto uc = static_cast< std::uint64_t >( c );
        std::uint64_t begin = uc * detail::monte_carlo_chunk_size;
        std::uint64_t n = std::min( detail::monte_carlo_chunk_size, samples - begin );
        hits += detail::monte_carlo_chunk( sets, prob, seed, uc, n );
    }
    return detail::finish_estimate( hits, samples );
}

FaultTree build_fault_tree( const std::vector< std::vector< std::string > >& mcs, const std::string& name )
{
    FaultTree ft;
    ft.top = name;
    for ( auto gate : mcs )
    {
        std::sort( gate.begin(), gate.end() );
        gate.erase( std::unique( gate.begin(), gate.end() ), gate.end() );
        ft.gates.push_back( std::move( gate ) );
    }
    for ( std::size_t i = 0; i < ft.gates.size(); ++i )
        for ( std::size_t j = 0; j < ft.gates.size(); ++j )
            if ( i != j && std::includes( ft.gates[ j ].begin(), ft.gates[ j ].end(), ft.gates[ i ].begin(), ft.gates[ i ].end() ) )
                throw CutSetError( "cut sets are not an antichain: {" +
                                   ( ft.gates[ i ].empty() ? std::string{} : ft.gates[ i ].front() + ",..." ) +
                                   "} is contained in another cut set" );
    std::sort( ft.gates.begin(), ft.gates.end() );
    return ft;
}

namespace
{

std::string dot_quote( const std::string& s )
{
    std::string out = "\"";
    for ( char c : s )
    {
        if ( c == '"' || c == '\\' )
            out += '\\';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string export_fault_tree_dot( const FaultTree& ft )
{
    std::ostringstream o;
    o << "digraph fault_tree {\n";
    o << "  node [fontname=\"Helvetica\"];\n";
    if ( ft.unreachable() )
    {
        o << "  top [label=\"unreachable\", shape=box, style=dashed];\n";
        o << "}\n";
        return o.str();
    }
    o << "  top [label=" << dot_quote( ft.top ) << ", shape=box];\n";
    if ( ft.always() )
    {
        o << "  const_true [label=\"true\", shape=plaintext];\n";
        o << "  top -> const_true;\n";
        o << "}\n";
        return o.str();
    }
    o << "  or0 [label=\"OR\", shape=invtriangle];\n";
    o << "  top -> or0;\n";
    std::set< std::string > events;
    for ( const auto& g : ft.gates )
        events.insert( g.begin(), g.end() );
    for ( std::size_t i = 0; i < ft.gates.size(); ++i )
        o << "  and" << i << " [label=\"AND\", shape=invhouse];\n";
    for ( const auto& e : events )
        o << "  " << dot_quote( "be_" + e ) << " [label=" << dot_quote( e ) << ", shape=circle];\n";
    for ( std::size_t i = 0; i < ft.gates.size(); ++i )
    {
        o << "  or0 -> and" << i << ";\n";
        for ( const auto& e : ft.gates[ i ] )
            o << "  and" << i << " -> " << dot_quote( "be_" + e ) << ";\n";
    }
    o << "}\n";
    return o.str();
}

nlohmann::json fault_tree_to_json( const FaultTree& ft )
{
    nlohmann::json j;
    j[ "top" ] = ft.top;
    j[ "gates" ] = ft.gates;
    return j;
}

FaultTree fault_tree_from_json( const nlohmann::json& j )
{
    if ( !j.is_object() || !j.contains( "top" ) || !j.contains( "gates" ) || !j[ "top" ].is_string() ||
         !j[ "gates" ].is_array() )
        throw CutSetError( "fault tree document needs 'top' (string) and 'gates' (list of lists)" );
    std::vector< std::vector< std::string > > gates;
    for ( const auto& g : j[ "gates" ] )
    {
        if ( !g.is_array() )
            throw CutSetError( "fault tree gate must be a list of basic-event names" );
        std::vector< std::string > gate;
        for ( const auto& e : g )
        {
            if ( !e.is_string() )
                throw CutSetError( "fault tree gate must be a list of basic-event names" );
            gate.push_back( e.get< std::string >() );
        }
        gates.push_back( std::move( gate ) );
    }
    return build_fault_tree( gates, j[ "top" ].get< std::string >() );
}

nlohmann::json mcs_to_json( const SystemModel& m, const std::vector< CutSet >& mcs )
{
    std::vector< std::vector< std::string > > lists;
    for ( auto c : mcs )
    {
        auto names = m.fault_names( c );
        std::sort( names.begin(), names.end() );
        lists.push_back( std::move( names ) );
    }
    std::sort( lists.begin(), lists.end(), []( const auto& a, const auto& b ) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    } );
    return lists;
}

} // namespace mbsa::cutsets
