#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mbsa/cutsets.hpp"
#include "support.hpp"

#include <bit>
#include <cmath>

using namespace mbsa;
using namespace mbsa::cutsets;
using namespace mbsa::testing;

namespace
{

FaultMask all_faults( const SystemModel& m ) { return ( FaultMask{ 1 } << m.fault_atoms().size() ) - 1; }

std::vector< std::vector< std::string > > names_of( const SystemModel& m, const std::vector< CutSet >& sets )
{
    std::vector< std::vector< std::string > > out;
    for ( auto s : sets )
        out.push_back( m.fault_names( s ) );
    return out;
}

struct Case
{
    std::string label;
    SystemModel model;
    Expr tle;
};

std::vector< Case > corpus_and_random_cases()
{
    std::vector< Case > cases;
    for ( const auto& name : corpus_model_names() )
    {
        auto m = corpus_model( name );
        for ( const auto& tle : corpus_tles( name ) )
        {
            auto e = m.parse_expr( tle );
            cases.push_back( { name + ":" + tle, m, e } );
        }
    }
    for ( std::uint64_t seed = 100; seed < 112; ++seed )
    {
        auto m = random_model( seed, { 6, 2, 40, 3 } );
        auto e = m.parse_expr( "h" );
        cases.push_back( { "random " + std::to_string( seed ), m, e } );
    }
    return cases;
}

} // namespace

TEST_CASE( "is_cut_set basics" )
{
    const auto m = corpus_model( "battery" );
    const auto dead = m.parse_expr( "system_dead" );
    CHECK( is_cut_set( m, dead, all_faults( m ) ) );
    CHECK_FALSE( is_cut_set( m, m.parse_expr( "b1_fail" ), 0 ) );
    CHECK_FALSE( is_cut_set( m, dead, m.fault_mask_of( std::vector< std::string >{ "b1_fail" } ) ) );
    CHECK( is_cut_set( m, dead, m.fault_mask_of( std::vector< std::string >{ "b1_fail", "b2_fail" } ) ) );
    CHECK_THROWS_AS( (void)m.parse_expr( "no_such_atom" ), ExprError );
}

TEST_CASE( "enumerate_mcs edge cases" )
{
    SUBCASE( "unreachable top event" )
    {
        const auto m = corpus_model( "battery" );
        const auto reports = enumerate_mcs( m, m.parse_expr( "charge & discharge" ) );
        CHECK( reports.back().lower_bound.empty() );
        CHECK( reports.back().exhausted );
    }
    SUBCASE( "top event holds initially" )
    {
        const auto m = corpus_model( "battery" );
        const auto reports = enumerate_mcs( m, m.parse_expr( "charge" ) );
        CHECK( reports.back().lower_bound == std::vector< CutSet >{ 0 } );
        CHECK( reports.front().lower_bound == std::vector< CutSet >{ 0 } );
    }
    SUBCASE( "battery" )
    {
        const auto m = corpus_model( "battery" );
        const auto reports = enumerate_mcs( m, m.parse_expr( "system_dead" ) );
        REQUIRE( reports.size() == 3 );
        CHECK( reports[ 1 ].lower_bound.empty() );
        CHECK( names_of( m, reports[ 2 ].lower_bound ) ==
               std::vector< std::vector< std::string > >{ { "b1_fail", "b2_fail" } } );
        CHECK( reports[ 2 ].lower_bound == brute_force_mcs( m, m.parse_expr( "system_dead" ) ) );
    }
}

TEST_CASE( "fault trees" )
{
    const auto ft = build_fault_tree( { { "f2", "f1" } }, "top" );
    CHECK( ft.gates == std::vector< std::vector< std::string > >{ { "f1", "f2" } } );
    const auto ft2 = build_fault_tree( { { "f2", "f3" }, { "f1" } }, "top" );
    CHECK( ft2.gates == std::vector< std::vector< std::string > >{ { "f1" }, { "f2", "f3" } } );
    CHECK_THROWS_AS( build_fault_tree( { { "f1" }, { "f1", "f2" } }, "top" ), CutSetError );

    CHECK( fault_tree_from_json( fault_tree_to_json( ft2 ) ).gates == ft2.gates );
    CHECK( export_fault_tree_dot( build_fault_tree( {}, "x" ) ).find( "unreachable" ) != std::string::npos );
    CHECK( build_fault_tree( { {} }, "x" ).always() );

    const auto dot = export_fault_tree_dot( ft );
    CHECK( dot.find( "invtriangle" ) != std::string::npos );
    CHECK( dot.find( "invhouse" ) != std::string::npos );

    const auto m = corpus_model( "battery" );
    const auto mcs = enumerate_mcs( m, m.parse_expr( "system_dead" ) ).back().lower_bound;
    const auto battery = build_fault_tree( names_of( m, mcs ), "system_dead" );
    CHECK( export_fault_tree_dot( battery ) == read_text_file( corpus_file( "golden/battery_fault_tree.dot" ) ) );
}

TEST_CASE( "probability examples" )
{
    CHECK( evaluate_probability( { {} }, {} ).value == 1.0 );
    CHECK( evaluate_probability( { { "f1" } }, { { "f1", 0.1 } } ).value == doctest::Approx( 0.1 ).epsilon( 1e-15 ) );
    const auto r = evaluate_probability( { { "f1", "f2" } }, { { "f1", 0.5 }, { "f2", 0.5 } } );
    CHECK( r.value == doctest::Approx( 0.25 ).epsilon( 1e-15 ) );
    CHECK( r.method == "both" );
    CHECK( evaluate_probability( {}, {} ).value == 0.0 );
    CHECK_THROWS_AS( evaluate_probability( { { "f1" } }, {} ), CutSetError );
    CHECK_THROWS_AS( evaluate_probability( { { "f1" } }, { { "f1", 1.5 } } ), CutSetError );
}

TEST_CASE( "probability against an outcome-sum oracle" )
{
    std::mt19937_64 rng( 7 );
    std::uniform_real_distribution< double > u( 0.0, 1.0 );
    for ( int round = 0; round < 40; ++round )
    {
        std::map< std::string, double > p;
        for ( int f = 0; f < 6; ++f )
            p[ "f" + std::to_string( f ) ] = u( rng );
        std::vector< std::vector< std::string > > family;
        for ( int k = 0; k < 4; ++k )
        {
            std::vector< std::string > s;
            for ( int f = 0; f < 6; ++f )
                if ( u( rng ) < 0.35 )
                    s.push_back( "f" + std::to_string( f ) );
            if ( !s.empty() )
                family.push_back( s );
        }
        // Keep it an antichain.
        std::vector< std::vector< std::string > > anti;
        for ( const auto& s : family )
            if ( std::none_of( family.begin(), family.end(), [ & ]( const auto& o ) {
                     return o != s && std::includes( s.begin(), s.end(), o.begin(), o.end() );
                 } ) && std::find( anti.begin(), anti.end(), s ) == anti.end() )
                anti.push_back( s );
        const double want = brute_force_probability( anti, p );
        CHECK( std::abs( probability_by_subsets( anti, p ) - want ) < 1e-12 );
        CHECK( std::abs( probability_by_inclusion_exclusion( anti, p ) - want ) < 1e-12 );
    }
}

TEST_CASE( "monte carlo" )
{
    const std::vector< std::vector< std::string > > family{ { "a" }, { "b", "c" } };
    const BasicEventProbabilities p{ { "a", 0.1 }, { "b", 0.3 }, { "c", 0.4 } };
    const double exact = evaluate_probability( family, p ).value;
    const auto est = estimate_probability_monte_carlo( family, p, 200000, 42 );
    CHECK( est.samples == 200000 );
    CHECK( std::abs( est.mean - exact ) < 4 * est.stddev );
    const auto serial = estimate_probability_monte_carlo_serial( family, p, 200000, 42 );
    CHECK( serial.mean == est.mean );
    CHECK( serial.stddev == est.stddev );
}

TEST_CASE( "property: cut sets are monotone" )
{
    std::mt19937_64 rng( 3 );
    for ( std::uint64_t seed = 1; seed <= 10; ++seed )
    {
        const auto m = random_model( seed, { 5, 2, 30, 3 } );
        const auto tle = m.parse_expr( "h" );
        for ( int k = 0; k < 30; ++k )
        {
            const FaultMask s = rng() & all_faults( m );
            const FaultMask bigger = s | ( rng() & all_faults( m ) );
            if ( is_cut_set( m, tle, s ) )
                CHECK( is_cut_set( m, tle, bigger ) );
        }
    }
}

TEST_CASE( "property: emitted sets are minimal cut sets" )
{
    for ( const auto& c : corpus_and_random_cases() )
    {
        CAPTURE( c.label );
        const auto reports = enumerate_mcs( c.model, c.tle );
        for ( auto s : reports.back().lower_bound )
        {
            CHECK( is_cut_set( c.model, c.tle, s ) );
            for ( FaultMask bit = s; bit; bit &= bit - 1 )
                CHECK_FALSE( is_cut_set( c.model, c.tle, s & ~( bit & -bit ) ) );
        }
    }
}

TEST_CASE( "property: every layer equals brute force up to its cardinality" )
{
    for ( const auto& c : corpus_and_random_cases() )
    {
        CAPTURE( c.label );
        const auto oracle = brute_force_mcs( c.model, c.tle );
        const auto reports = enumerate_mcs( c.model, c.tle );
        CHECK( reports.size() == c.model.fault_atoms().size() + 1 );
        std::vector< CutSet > previous;
        for ( const auto& r : reports )
        {
            std::vector< CutSet > expected;
            for ( auto s : oracle )
                if ( static_cast< std::size_t >( std::popcount( s ) ) <= r.completed_cardinality )
                    expected.push_back( s );
            CHECK( r.lower_bound == expected );
            CHECK( std::includes( r.lower_bound.begin(), r.lower_bound.end(), previous.begin(), previous.end(),
                                  cardinality_order ) );
            previous = r.lower_bound;
        }
        CHECK( reports.back().exhausted );
        CHECK( reports.back().lower_bound == oracle );
    }
}

TEST_CASE( "property: parallel and serial enumeration agree" )
{
    for ( const auto& c : corpus_and_random_cases() )
    {
        const auto par = enumerate_mcs( c.model, c.tle );
        const auto ser = enumerate_mcs_serial( c.model, c.tle );
        REQUIRE( par.size() == ser.size() );
        for ( std::size_t k = 0; k < par.size(); ++k )
        {
            CHECK( par[ k ].lower_bound == ser[ k ].lower_bound );
            CHECK( par[ k ].reachability_checks == ser[ k ].reachability_checks );
            CHECK( par[ k ].pruned_supersets == ser[ k ].pruned_supersets );
        }
    }
}

TEST_CASE( "property: exact probability routes agree on corpus cut sets" )
{
    for ( const auto& c : corpus_and_random_cases() )
    {
        const auto mcs = enumerate_mcs( c.model, c.tle ).back().lower_bound;
        BasicEventProbabilities p;
        for ( std::size_t i = 0; i < c.model.fault_atoms().size(); ++i )
            p[ c.model.atom_names()[ c.model.fault_atoms()[ i ] ] ] = 0.05 + 0.07 * static_cast< double >( i );
        const auto family = names_of( c.model, mcs );
        CHECK( std::abs( probability_by_subsets( family, p ) - probability_by_inclusion_exclusion( family, p ) ) < 1e-12 );
    }
}
