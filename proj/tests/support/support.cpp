#include "support.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <map>
#include <set>

#ifndef MBSA_CORPUS_DIR
#error "MBSA_CORPUS_DIR must point at tests/corpus"
#endif

namespace mbsa::testing
{

std::filesystem::path corpus_dir() { return MBSA_CORPUS_DIR; }

std::filesystem::path corpus_file( const std::string& relative ) { return corpus_dir() / relative; }

const std::vector< std::string >& corpus_model_names()
{
    static const std::vector< std::string > names{ "battery",    "bound_window", "minimal",   "pump",      "sensor_delay",
                                                   "synth_and", "synth_or",     "trace_diag", "twin_unobs" };
    return names;
}

SystemModel corpus_model( const std::string& name ) { return load_model( corpus_file( name + ".json" ) ); }

std::vector< fdi::AlarmSpec > corpus_specs( const SystemModel& m, const std::string& name )
{
    const auto path = corpus_file( "specs/" + name + ".json" );
    if ( !std::filesystem::exists( path ) )
        return {};
    return fdi::load_specs( m, path );
}

std::vector< std::string > corpus_tles( const std::string& name )
{
    static const std::map< std::string, std::vector< std::string > > tles{
        { "battery", { "system_dead", "low_voltage", "b1_fail & discharge", "idle & !b2_fail" } },
        { "bound_window", { "p", "q | r" } },
        { "minimal", { "ok", "!ok" } },
        { "pump", { "flow_loss", "pressure_low", "flow_loss & standby", "f_pump | f_valve" } },
        { "sensor_delay", { "o", "f & !o" } },
        { "synth_and", { "d", "f1 | f2" } },
        { "synth_or", { "d", "f1 & f2" } },
        { "trace_diag", { "o", "f" } },
        { "twin_unobs", { "hot", "o" } },
    };
    return tles.at( name );
}

SystemModel random_model( std::uint64_t seed, const RandomModelOptions& opt )
{
    std::mt19937_64 rng( seed );
    auto chance = [ & ]( double p ) { return std::bernoulli_distribution( p )( rng ); };
    const unsigned nf = opt.faults;
    const unsigned n = std::max( 2U, opt.states );

    SystemModel::Parts parts;
    for ( unsigned f = 0; f < nf; ++f )
    {
        parts.atoms.push_back( "f" + std::to_string( f ) );
        parts.faults.push_back( parts.atoms.back() );
    }
    for ( unsigned o = 0; o < opt.observables; ++o )
    {
        parts.atoms.push_back( "o" + std::to_string( o ) );
        parts.observables.push_back( parts.atoms.back() );
    }
    parts.atoms.push_back( "h" );

    // Fault masks grow with the state index, so later states tend to be
    // more degraded and persistence leaves room for real choices.
    std::vector< FaultMask > mask( n );
    for ( unsigned s = 2; s < n; ++s )
    {
        FaultMask mk = 0;
        for ( unsigned f = 0; f < nf; ++f )
            if ( chance( 0.12 + 0.5 * s / n / std::max( 1U, nf / 2 ) ) )
                mk |= FaultMask{ 1 } << f;
        mask[ s ] = mk;
    }
    for ( unsigned s = 0; s < n; ++s )
    {
        parts.state_names.push_back( "s" + std::to_string( s ) );
        std::vector< bool > val( parts.atoms.size(), false );
        for ( unsigned f = 0; f < nf; ++f )
            val[ f ] = ( mask[ s ] >> f ) & 1U;
        for ( unsigned o = 0; o < opt.observables; ++o )
            val[ nf + o ] = o == 0 && nf > 0 ? ( chance( 0.7 ) ? ( mask[ s ] & 1U ) != 0 : chance( 0.5 ) ) : chance( 0.5 );
        val.back() = mask[ s ] ? chance( 0.3 ) : chance( 0.03 );
        parts.valuations.push_back( std::move( val ) );
    }
    parts.initial.push_back( "s0" );
    if ( chance( 0.5 ) )
        parts.initial.push_back( "s1" );
    std::uniform_int_distribution< unsigned > pick( 0, n - 1 );
    for ( unsigned s = 0; s < n; ++s )
    {
        std::set< unsigned > targets;
        const unsigned want = 1 + static_cast< unsigned >( rng() % std::max( 1U, opt.max_out_degree ) );
        for ( unsigned tries = 0; tries < 8 * want && targets.size() < want; ++tries )
        {
            const auto t = pick( rng );
            if ( ( mask[ s ] & ~mask[ t ] ) == 0 )
                targets.insert( t );
        }
        if ( targets.empty() )
            targets.insert( s );
        for ( auto t : targets )
            parts.transitions.emplace_back( parts.state_names[ s ], parts.state_names[ t ] );
    }
    return SystemModel{ std::move( parts ) };
}

// ---------------------------------------------------------------------------

void all_paths( const SystemModel& m, std::size_t length, const std::function< void( const std::vector< StateId >& ) >& visit )
{
    if ( length == 0 )
        return;
    std::vector< StateId > path;
    std::function< void() > extend = [ & ] {
        if ( path.size() == length )
        {
            visit( path );
            return;
        }
        for ( auto b : m.successors( path.back() ) )
        {
            path.push_back( b );
            extend();
            path.pop_back();
        }
    };
    for ( auto s : m.initial_states() )
    {
        path.assign( 1, s );
        extend();
    }
}

std::uint64_t path_count_by_matrix( const SystemModel& m, std::size_t length )
{
    const auto n = m.state_count();
    std::vector< std::uint64_t > row( n, 0 );
    for ( auto s : m.initial_states() )
        row[ s ] += 1;
    for ( std::size_t k = 1; k < length; ++k )
    {
        std::vector< std::uint64_t > next( n, 0 );
        for ( auto [ a, b ] : m.transitions() )
            next[ b ] += row[ a ];
        row = std::move( next );
    }
    std::uint64_t total = 0;
    for ( auto c : row )
        total += c;
    return total;
}

// ---------------------------------------------------------------------------

bool reaches_with( const SystemModel& m, const Expr& tle, FaultMask allowed )
{
    std::vector< bool > seen( m.state_count(), false );
    std::deque< StateId > queue;
    auto admit = [ & ]( StateId s ) {
        if ( !seen[ s ] && ( m.fault_mask( s ) & ~allowed ) == 0 )
        {
            seen[ s ] = true;
            queue.push_back( s );
        }
    };
    for ( auto s : m.initial_states() )
        admit( s );
    while ( !queue.empty() )
    {
        const auto s = queue.front();
        queue.pop_front();
        if ( tle.evaluate( m.valuation( s ) ) )
            return true;
        for ( auto [ a, b ] : m.transitions() )
            if ( a == s )
                admit( b );
    }
    return false;
}

std::vector< FaultMask > brute_force_mcs( const SystemModel& m, const Expr& tle )
{
    const auto nf = m.fault_atoms().size();
    std::vector< FaultMask > cuts;
    for ( FaultMask s = 0; s < ( FaultMask{ 1 } << nf ); ++s )
        if ( reaches_with( m, tle, s ) )
            cuts.push_back( s );
    std::vector< FaultMask > minimal;
    for ( auto c : cuts )
        if ( std::none_of( cuts.begin(), cuts.end(), [ c ]( FaultMask o ) { return o != c && ( o & ~c ) == 0; } ) )
            minimal.push_back( c );
    std::sort( minimal.begin(), minimal.end(), []( FaultMask a, FaultMask b ) {
        return std::pair( std::popcount( a ), a ) < std::pair( std::popcount( b ), b );
    } );
    return minimal;
}

double brute_force_probability( const std::vector< std::vector< std::string > >& sets,
                                const std::map< std::string, double >& p )
{
    std::vector< std::string > events;
    for ( const auto& s : sets )
        events.insert( events.end(), s.begin(), s.end() );
    std::sort( events.begin(), events.end() );
    events.erase( std::unique( events.begin(), events.end() ), events.end() );
    double total = 0.0;
    for ( std::uint64_t outcome = 0; outcome < ( std::uint64_t{ 1 } << events.size() ); ++outcome )
    {
        auto occurred = [ & ]( const std::string& e ) {
            const auto i = std::lower_bound( events.begin(), events.end(), e ) - events.begin();
            return ( ( outcome >> i ) & 1U ) != 0;
        };
        const bool top = std::any_of( sets.begin(), sets.end(), [ & ]( const auto& s ) {
            return std::all_of( s.begin(), s.end(), occurred );
        } );
        if ( !top )
            continue;
        double w = 1.0;
        for ( std::size_t i = 0; i < events.size(); ++i )
            w *= ( ( outcome >> i ) & 1U ) ? p.at( events[ i ] ) : 1.0 - p.at( events[ i ] );
        total += w;
    }
    return total;
}

// ---------------------------------------------------------------------------

bool naive_past( fdi::DelayKind kind, unsigned n, const std::vector< bool >& beta, std::size_t t )
{
    switch ( kind )
    {
    case fdi::DelayKind::exact: return t >= n && beta[ t - n ];
    case fdi::DelayKind::bounded:
        for ( std::size_t j = t >= n ? t - n : 0; j <= t; ++j )
            if ( beta[ j ] )
                return true;
        return false;
    case fdi::DelayKind::finite:
        for ( std::size_t j = 0; j <= t; ++j )
            if ( beta[ j ] )
                return true;
        return false;
    }
    return false;
}

std::vector< bool > beta_along( const SystemModel& m, const Expr& beta, const std::vector< StateId >& path )
{
    std::vector< bool > out;
    for ( auto s : path )
        out.push_back( beta.evaluate( m.valuation( s ) ) );
    return out;
}

std::vector< std::vector< StateId > > observation_class( const SystemModel& m, const std::vector< StateId >& path,
                                                         std::size_t t )
{
    std::vector< std::vector< StateId > > out;
    std::vector< StateId > cur;
    std::function< void() > extend = [ & ] {
        if ( cur.size() == t + 1 )
        {
            out.push_back( cur );
            return;
        }
        const auto want = m.observation( path[ cur.size() ] );
        for ( auto [ a, b ] : m.transitions() )
            if ( a == cur.back() && m.observation( b ) == want )
            {
                cur.push_back( b );
                extend();
                cur.pop_back();
            }
    };
    for ( auto s : m.initial_states() )
        if ( m.observation( s ) == m.observation( path[ 0 ] ) )
        {
            cur.assign( 1, s );
            extend();
        }
    return out;
}

bool naive_knows( const SystemModel& m, const std::vector< StateId >& path, std::size_t t, fdi::DelayKind kind,
                  unsigned n, const Expr& beta )
{
    for ( const auto& other : observation_class( m, path, t ) )
        if ( !naive_past( kind, n, beta_along( m, beta, other ), t ) )
            return false;
    return true;
}

// ---------------------------------------------------------------------------

DiagnosabilityOracle brute_force_diagnosability( const SystemModel& m, const fdi::AlarmSpec& spec, std::size_t horizon )
{
    const auto kind = spec.delay.kind;
    const unsigned n = spec.delay.n;

    // doubt[obs prefix] = some path with these observations falsifies the
    // certainty formula at its last step.
    std::set< std::vector< Observation > > doubt;
    for ( std::size_t len = 1; len <= horizon; ++len )
        all_paths( m, len, [ & ]( const std::vector< StateId >& p ) {
            if ( !naive_past( kind, n, beta_along( m, spec.beta, p ), len - 1 ) )
            {
                std::vector< Observation > key;
                for ( auto s : p )
                    key.push_back( m.observation( s ) );
                doubt.insert( std::move( key ) );
            }
        } );
    auto doubted = [ & ]( const std::vector< StateId >& p, std::size_t t ) {
        std::vector< Observation > key;
        for ( std::size_t j = 0; j <= t; ++j )
            key.push_back( m.observation( p[ j ] ) );
        return doubt.contains( key );
    };

    DiagnosabilityOracle out;
    auto found = [ & ]( std::size_t length ) {
        out.diagnosable = false;
        if ( !out.witness_length || length < *out.witness_length )
            out.witness_length = length;
    };
    for ( std::size_t len = 1; len <= horizon; ++len )
        all_paths( m, len, [ & ]( const std::vector< StateId >& p ) {
            const auto beta = beta_along( m, spec.beta, p );
            switch ( kind )
            {
            case fdi::DelayKind::exact:
                // Occurrence at len-1-n, decided at the last step.
                if ( len > n && beta[ len - 1 - n ] && doubted( p, len - 1 ) )
                    found( len );
                break;
            case fdi::DelayKind::bounded:
                if ( len > n && beta[ len - 1 - n ] )
                {
                    bool never = true;
                    for ( std::size_t tp = len - 1 - n; tp < len && never; ++tp )
                        never = doubted( p, tp );
                    if ( never )
                        found( len );
                }
                break;
            case fdi::DelayKind::finite:
                if ( len == horizon )
                    for ( std::size_t t = 0; t <= horizon / 2; ++t )
                        if ( beta[ t ] )
                        {
                            bool never = true;
                            for ( std::size_t tp = t; tp < len && never; ++tp )
                                never = doubted( p, tp );
                            if ( never )
                                found( len );
                            break;
                        }
                break;
            }
        } );
    return out;
}

namespace
{

template < class R, class T >
bool contains( const R& r, const T& v )
{
    return std::find( std::begin( r ), std::end( r ), v ) != std::end( r );
}

bool is_path( const SystemModel& m, const std::vector< StateId >& p )
{
    if ( p.empty() || !contains( m.initial_states(), p.front() ) )
        return false;
    for ( std::size_t k = 1; k < p.size(); ++k )
        if ( !contains( m.successors( p[ k - 1 ] ), p[ k ] ) )
            return false;
    return true;
}

bool same_observations( const SystemModel& m, const std::vector< StateId >& a, const std::vector< StateId >& b,
                        std::size_t len )
{
    for ( std::size_t k = 0; k < len; ++k )
        if ( m.observation( a[ k ] ) != m.observation( b[ k ] ) )
            return false;
    return true;
}

} // namespace

bool replay_critical_pair( const SystemModel& m, const fdi::AlarmSpec& spec, const diag::CriticalPair& pair )
{
    const auto& w = pair.witness.steps;
    const unsigned n = spec.delay.n;
    if ( !is_path( m, w ) || pair.t >= w.size() || !beta_along( m, spec.beta, w )[ pair.t ] )
        return false;
    for ( const auto& c : pair.confusers )
        if ( !is_path( m, c.steps ) || c.steps.size() > w.size() || !same_observations( m, w, c.steps, c.steps.size() ) )
            return false;
    switch ( spec.delay.kind )
    {
    case fdi::DelayKind::exact:
    {
        if ( pair.confusers.size() != 1 || w.size() != pair.t + n + 1 )
            return false;
        const auto& c = pair.confusers[ 0 ].steps;
        return c.size() == w.size() && !naive_past( fdi::DelayKind::exact, n, beta_along( m, spec.beta, c ), c.size() - 1 );
    }
    case fdi::DelayKind::bounded:
    {
        if ( pair.confusers.size() != n + 1 || w.size() != pair.t + n + 1 )
            return false;
        for ( std::size_t j = 0; j <= n; ++j )
        {
            const auto& c = pair.confusers[ j ].steps;
            if ( c.size() != pair.t + j + 1 ||
                 naive_past( fdi::DelayKind::bounded, n, beta_along( m, spec.beta, c ), c.size() - 1 ) )
                return false;
        }
        return true;
    }
    case fdi::DelayKind::finite:
    {
        if ( pair.confusers.size() != 1 || !pair.loop_start )
            return false;
        const auto& c = pair.confusers[ 0 ].steps;
        const auto ls = *pair.loop_start;
        if ( c.size() != w.size() || ls >= w.size() )
            return false;
        // Both lassos close on the same step, so observations agree forever.
        if ( !contains( m.successors( w.back() ), w[ ls ] ) ||
             !contains( m.successors( c.back() ), c[ ls ] ) )
            return false;
        const auto beta = beta_along( m, spec.beta, c );
        return std::ranges::none_of( beta, []( bool b ) { return b; } );
    }
    }
    return false;
}

bool naive_trace_diagnosable( const SystemModel& m, const fdi::AlarmSpec& spec, const std::vector< StateId >& path,
                              std::size_t t )
{
    const auto kind = spec.delay.kind;
    const unsigned n = spec.delay.n;
    switch ( kind )
    {
    case fdi::DelayKind::exact: return naive_knows( m, path, t + n, kind, n, spec.beta );
    case fdi::DelayKind::bounded:
        for ( std::size_t tp = t; tp <= t + n; ++tp )
            if ( naive_knows( m, path, tp, kind, n, spec.beta ) )
                return true;
        return false;
    case fdi::DelayKind::finite:
        for ( std::size_t tp = t; tp < path.size(); ++tp )
            if ( naive_knows( m, path, tp, kind, n, spec.beta ) )
                return true;
        return false;
    }
    return false;
}

// ---------------------------------------------------------------------------

bool naive_consistent( const tfpg::Tfpg& g, const tfpg::ActivationTrace& at )
{
    const unsigned h = at.horizon;
    auto act = [ & ]( const std::string& node ) -> std::optional< unsigned > {
        auto it = at.activations.find( node );
        return it == at.activations.end() ? std::nullopt : it->second;
    };
    auto enabled = [ & ]( const tfpg::Edge& e, unsigned t ) {
        return std::find( e.modes.begin(), e.modes.end(), at.modes[ t ] ) != e.modes.end();
    };
    auto clock = [ & ]( const tfpg::Edge& e, unsigned t ) -> std::optional< unsigned > {
        const auto tu = act( e.from );
        if ( !tu || *tu > t || !enabled( e, t ) )
            return std::nullopt;
        unsigned start = t;
        while ( start > *tu && enabled( e, start - 1 ) )
            --start;
        return t - start;
    };
    auto satisfied = [ & ]( const tfpg::Edge& e, unsigned t ) {
        const auto c = clock( e, t );
        return c && *c >= e.tmin && *c <= e.tmax;
    };
    auto due = [ & ]( const tfpg::Edge& e, unsigned t ) {
        const auto c = clock( e, t );
        return c && e.tmax != tfpg::infinity && *c == e.tmax;
    };

    for ( const auto& [ v, kind ] : g.nodes )
    {
        if ( kind == tfpg::NodeKind::failure_mode )
            continue;
        std::vector< const tfpg::Edge* > in;
        for ( const auto& e : g.edges )
            if ( e.to == v )
                in.push_back( &e );
        const auto tv = act( v );
        const unsigned end = tv ? *tv : h + 1;
        if ( kind == tfpg::NodeKind::or_node )
        {
            if ( tv && std::none_of( in.begin(), in.end(), [ & ]( auto* e ) { return satisfied( *e, *tv ); } ) )
                return false;
            for ( unsigned d = 0; d < end; ++d )
                if ( std::any_of( in.begin(), in.end(), [ & ]( auto* e ) { return due( *e, d ); } ) )
                    return false;
        }
        else
        {
            if ( tv && ( in.empty() || !std::all_of( in.begin(), in.end(), [ & ]( auto* e ) { return satisfied( *e, *tv ); } ) ) )
                return false;
            // Overdue once each incoming edge has hit its upper bound at some step.
            auto been_due = [ & ]( const tfpg::Edge* e, unsigned d ) {
                for ( unsigned k = 0; k <= d; ++k )
                    if ( due( *e, k ) )
                        return true;
                return false;
            };
            for ( unsigned d = 0; d < end && !in.empty(); ++d )
                if ( std::all_of( in.begin(), in.end(), [ & ]( auto* e ) { return been_due( e, d ); } ) )
                    return false;
        }
    }
    return true;
}

void all_activation_traces( const tfpg::Tfpg& g, unsigned horizon,
                            const std::function< void( const tfpg::ActivationTrace& ) >& visit )
{
    std::vector< std::string > names;
    for ( const auto& [ name, kind ] : g.nodes )
        names.push_back( name );
    tfpg::ActivationTrace at;
    at.horizon = horizon;
    at.modes.assign( horizon + 1, g.modes.front() );
    std::vector< std::size_t > mode_idx( horizon + 1, 0 );
    std::vector< unsigned > act( names.size(), 0 );  // horizon + 1 encodes never

    for ( ;; )
    {
        for ( std::size_t i = 0; i < names.size(); ++i )
            at.activations[ names[ i ] ] = act[ i ] > horizon ? std::nullopt : std::optional< unsigned >( act[ i ] );
        visit( at );

        // Odometer over activations, then over the mode timeline.
        std::size_t i = 0;
        for ( ; i < act.size(); ++i )
        {
            if ( ++act[ i ] <= horizon + 1 )
                break;
            act[ i ] = 0;
        }
        if ( i < act.size() )
            continue;
        std::size_t k = 0;
        for ( ; k < mode_idx.size(); ++k )
        {
            if ( ++mode_idx[ k ] < g.modes.size() )
            {
                at.modes[ k ] = g.modes[ mode_idx[ k ] ];
                break;
            }
            mode_idx[ k ] = 0;
            at.modes[ k ] = g.modes.front();
        }
        if ( k == mode_idx.size() )
            return;
    }
}

tfpg::ActivationTrace naive_induced_trace( const SystemModel& m, const tfpg::Tfpg& g, const tfpg::NodeMap& nm,
                                           const std::vector< StateId >& path )
{
    tfpg::ActivationTrace at;
    at.horizon = static_cast< unsigned >( path.size() - 1 );
    for ( auto s : path )
    {
        std::string mode;
        for ( const auto& [ name, expr ] : nm.modes )
            if ( expr.evaluate( m.valuation( s ) ) )
                mode = name;
        at.modes.push_back( mode );
    }
    auto first = [ & ]( const std::string& node ) -> std::optional< unsigned > {
        const auto& p = nm.nodes.at( node );
        for ( unsigned t = 0; t < path.size(); ++t )
            if ( p.expr.evaluate( m.valuation( path[ t ] ) ) )
                return t;
        return std::nullopt;
    };
    for ( const auto& [ node, kind ] : g.nodes )
    {
        const auto& p = nm.nodes.at( node );
        if ( p.all_of.empty() )
        {
            at.activations[ node ] = first( node );
            continue;
        }
        std::optional< unsigned > last = 0U;
        for ( const auto& member : p.all_of )
        {
            const auto t = first( member );
            last = t && last ? std::optional< unsigned >( std::max( *t, *last ) ) : std::nullopt;
        }
        at.activations[ node ] = last;
    }
    return at;
}

bool naive_complete( const SystemModel& m, const tfpg::Tfpg& g, const tfpg::NodeMap& nm, unsigned horizon )
{
    bool complete = true;
    all_paths( m, horizon, [ & ]( const std::vector< StateId >& p ) {
        if ( complete && !naive_consistent( g, naive_induced_trace( m, g, nm, p ) ) )
            complete = false;
    } );
    return complete;
}

const std::vector< std::pair< std::string, unsigned > >& corpus_tfpgs()
{
    static const std::vector< std::pair< std::string, unsigned > > graphs{
        { "tfpg/simple.json", 6 },     { "tfpg/mode_cancel.json", 6 }, { "tfpg/possibility.json", 6 },
        { "tfpg/and_or.json", 5 },     { "tfpg/chain.json", 4 },       { "tfpg/pump.json", 5 },
        { "tfpg/sensor_delay.json", 8 },
    };
    return graphs;
}

const std::vector< SynthesisCase >& corpus_synthesis_cases()
{
    static const std::vector< SynthesisCase > cases{
        { "synth_or", "tfpg/synth_or.request.json" },   { "synth_and", "tfpg/synth_and.request.json" },
        { "pump", "tfpg/pump.request.json" },           { "battery", "tfpg/battery.request.json" },
        { "sensor_delay", "tfpg/sensor_delay.request.json" },
    };
    return cases;
}

} // namespace mbsa::testing
