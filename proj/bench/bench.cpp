// Parallel kernels against their serial references.

#include "mbsa/cutsets.hpp"
#include "mbsa/diagnosability.hpp"
#include "mbsa/synthesis.hpp"
#include "mbsa/tfpg.hpp"
#include "support.hpp"

#include <benchmark/benchmark.h>
#include <json.hpp>

using namespace mbsa;
using namespace mbsa::testing;

namespace
{

const SystemModel& large_model()
{
    static const auto m = random_model( 77, { 10, 3, 200, 3 } );
    return m;
}

fdi::AlarmSpec spec_for( const SystemModel& m, const std::string& beta, fdi::Delay delay )
{
    fdi::AlarmSpec s;
    s.alarm = "a";
    s.beta_text = beta;
    s.beta = m.parse_expr( beta );
    s.delay = delay;
    return s;
}

void BM_Mcs( benchmark::State& st, bool parallel )
{
    const auto& m = large_model();
    const auto tle = m.parse_expr( "h" );
    for ( auto _ : st )
        benchmark::DoNotOptimize( parallel ? cutsets::enumerate_mcs( m, tle ) : cutsets::enumerate_mcs_serial( m, tle ) );
}

void BM_TwinPlant( benchmark::State& st, bool parallel )
{
    const auto m = random_model( 5, { 3, 1, 120, 3 } );
    const auto s = spec_for( m, "f0 | h", { fdi::DelayKind::bounded, 3 } );
    for ( auto _ : st )
        benchmark::DoNotOptimize( parallel ? diag::check_diagnosability( m, s ) : diag::check_diagnosability_serial( m, s ) );
}

void BM_Synthesis( benchmark::State& st, bool parallel )
{
    const auto m = random_model( 9, { 3, 2, 60, 3 } );
    const std::vector< fdi::AlarmSpec > specs{ spec_for( m, "f0", { fdi::DelayKind::exact, 2 } ) };
    for ( auto _ : st )
        benchmark::DoNotOptimize( parallel ? synth::synthesize_diagnoser( m, specs )
                                           : synth::synthesize_diagnoser_serial( m, specs ) );
}

void BM_Behavioral( benchmark::State& st, bool parallel )
{
    const auto m = corpus_model( "pump" );
    const auto g = tfpg::load_tfpg( corpus_file( "tfpg/pump.json" ) );
    const auto nm = tfpg::parse_node_map( m, g, nlohmann::json::parse( read_text_file( corpus_file( "tfpg/pump.map.json" ) ) ) );
    const auto horizon = static_cast< unsigned >( st.range( 0 ) );
    for ( auto _ : st )
        benchmark::DoNotOptimize( parallel ? tfpg::behavioral_validate( g, m, nm, horizon )
                                           : tfpg::behavioral_validate_serial( g, m, nm, horizon ) );
}

void BM_MonteCarlo( benchmark::State& st, bool parallel )
{
    const std::vector< std::vector< std::string > > family{ { "a" }, { "b", "c" }, { "c", "d", "e" } };
    const cutsets::BasicEventProbabilities p{ { "a", 0.01 }, { "b", 0.2 }, { "c", 0.3 }, { "d", 0.4 }, { "e", 0.5 } };
    for ( auto _ : st )
        benchmark::DoNotOptimize( parallel ? cutsets::estimate_probability_monte_carlo( family, p, 1'000'000, 1 )
                                           : cutsets::estimate_probability_monte_carlo_serial( family, p, 1'000'000, 1 ) );
}

} // namespace

BENCHMARK_CAPTURE( BM_Mcs, serial, false )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_Mcs, parallel, true )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_TwinPlant, serial, false )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_TwinPlant, parallel, true )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_Synthesis, serial, false )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_Synthesis, parallel, true )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_Behavioral, serial, false )->Arg( 8 )->Arg( 10 )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_Behavioral, parallel, true )->Arg( 8 )->Arg( 10 )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_MonteCarlo, serial, false )->Unit( benchmark::kMillisecond );
BENCHMARK_CAPTURE( BM_MonteCarlo, parallel, true )->Unit( benchmark::kMillisecond );

BENCHMARK_MAIN();
