#include "cli.hpp"

#include "mbsa/cutsets.hpp"
#include "mbsa/diagnosability.hpp"
#include "mbsa/fdi_spec.hpp"
#include "mbsa/synthesis.hpp"
#include "mbsa/tfpg.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

namespace mbsa::cli
{

namespace
{

using nlohmann::json;

class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct Config
{
    std::string model, spec, tfpg, map, trace, diagnoser, tle, probs, tree, alarm, out;
    std::string format = "json";
    unsigned horizon = 0;
    std::size_t at = 0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 1;
    int jobs = 0;
};

/// What a subcommand produced: a JSON report, or a DOT document.
struct Output
{
    Output( json r, std::optional< std::string > d = std::nullopt, int c = ok )
        : report( std::move( r ) ), dot( std::move( d ) ), code( c )
    {
    }

    json report;
    std::optional< std::string > dot;
    int code = ok;
};

json load_json( const std::string& path )
{
    const auto text = read_text_file( path );
    try
    {
        return json::parse( text );
    }
    catch ( const json::parse_error& e )
    {
        throw UsageError( path + ": " + e.what() );
    }
}

void render_text( const json& j, std::ostream& os, int indent )
{
    const std::string pad( static_cast< std::size_t >( indent ) * 2, ' ' );
    auto scalar = []( const json& v ) { return v.is_string() ? v.get< std::string >() : v.dump(); };
    if ( j.is_object() )
        for ( const auto& [ k, v ] : j.items() )
        {
            if ( v.is_structured() && !v.empty() )
            {
                os << pad << k << ":\n";
                render_text( v, os, indent + 1 );
            }
            else
                os << pad << k << ": " << scalar( v ) << '\n';
        }
    else if ( j.is_array() )
        for ( const auto& v : j )
        {
            if ( v.is_structured() && !v.empty() )
            {
                os << pad << "-\n";
                render_text( v, os, indent + 1 );
            }
            else
                os << pad << "- " << scalar( v ) << '\n';
        }
    else
        os << pad << scalar( j ) << '\n';
}

std::vector< std::vector< std::string > > mcs_names( const SystemModel& m, const std::vector< cutsets::CutSet >& mcs )
{
    std::vector< std::vector< std::string > > out;
    for ( auto cs : mcs )
    {
        auto names = m.fault_names( cs );
        std::sort( names.begin(), names.end() );
        out.push_back( std::move( names ) );
    }
    return out;
}

std::vector< fdi::AlarmSpec > selected_specs( const SystemModel& m, const Config& c )
{
    auto specs = fdi::load_specs( m, c.spec );
    if ( !c.alarm.empty() )
    {
        std::erase_if( specs, [ & ]( const fdi::AlarmSpec& s ) { return s.alarm != c.alarm; } );
        if ( specs.empty() )
            throw UsageError( "no alarm named '" + c.alarm + "' in " + c.spec );
    }
    return specs;
}

Trace load_state_trace( const SystemModel& m, const std::string& path )
{
    const auto j = load_json( path );
    const json& states = j.is_object() && j.contains( "states" ) ? j[ "states" ] : j;
    if ( !states.is_array() )
        throw UsageError( path + ": expected a list of state names" );
    std::vector< std::string > names;
    for ( const auto& s : states )
    {
        if ( !s.is_string() )
            throw UsageError( path + ": state names must be strings" );
        names.push_back( s.get< std::string >() );
    }
    return trace_from_names( m, names );
}

json names_json( const SystemModel& m, const Trace& tr ) { return trace_names( m, tr ); }

tfpg::NodeMap node_map( const SystemModel& m, const tfpg::Tfpg& g, const Config& c )
{
    if ( !c.map.empty() )
        return tfpg::parse_node_map( m, g, load_json( c.map ) );
    if ( g.map )
        return tfpg::parse_node_map( m, g, *g.map );
    throw UsageError( "--map is required: the graph embeds no node map" );
}

unsigned required_horizon( const Config& c )
{
    if ( c.horizon == 0 )
        throw UsageError( "--horizon must be at least 1" );
    return c.horizon;
}

// ---------------------------------------------------------------------------
// Subcommands

Output validate_model_cmd( const Config& c )
{
    const auto m = load_model( c.model );
    const auto report = validate_model( m );
    json violations = json::array();
    for ( const auto& v : report )
        violations.push_back( { { "kind", to_string( v.kind ) }, { "message", v.message } } );
    return { { { "states", m.state_count() }, { "valid", report.empty() }, { "violations", violations } },
             std::nullopt,
             report.empty() ? ok : property_fails };
}

Output mcs_cmd( const Config& c )
{
    const auto m = load_model( c.model );
    const auto reports = cutsets::enumerate_mcs( m, m.parse_expr( c.tle ) );
    json layers = json::array();
    for ( const auto& r : reports )
        layers.push_back( { { "cardinality", r.completed_cardinality }, { "count", r.lower_bound.size() } } );
    const auto& last = reports.back();
    return { { { "tle", c.tle },
               { "mcs", cutsets::mcs_to_json( m, last.lower_bound ) },
               { "exhausted", last.exhausted },
               { "layers", layers },
               { "reachability_checks", last.reachability_checks },
               { "pruned_supersets", last.pruned_supersets } } };
}

cutsets::FaultTree fault_tree_of( const Config& c )
{
    if ( !c.tree.empty() )
        return cutsets::fault_tree_from_json( load_json( c.tree ) );
    if ( c.model.empty() || c.tle.empty() )
        throw UsageError( "give either --tree or both --model and --tle" );
    const auto m = load_model( c.model );
    const auto reports = cutsets::enumerate_mcs( m, m.parse_expr( c.tle ) );
    return cutsets::build_fault_tree( mcs_names( m, reports.back().lower_bound ), c.tle );
}

Output fault_tree_cmd( const Config& c )
{
    const auto ft = fault_tree_of( c );
    return { cutsets::fault_tree_to_json( ft ), cutsets::export_fault_tree_dot( ft ) };
}

Output ft_prob_cmd( const Config& c )
{
    const auto ft = fault_tree_of( c );
    const auto pj = load_json( c.probs );
    if ( !pj.is_object() )
        throw UsageError( c.probs + ": expected an object of basic-event probabilities" );
    cutsets::BasicEventProbabilities p;
    for ( const auto& [ name, v ] : pj.items() )
    {
        if ( !v.is_number() )
            throw UsageError( c.probs + ": probability of '" + name + "' must be a number" );
        p[ name ] = v.get< double >();
    }
    const auto exact = cutsets::evaluate_probability( ft.gates, p );
    json report{ { "top", ft.top },
                 { "probability", exact.value },
                 { "method", exact.method },
                 { "cross_check_delta", exact.cross_check_delta } };
    if ( c.samples > 0 )
    {
        const auto mc = cutsets::estimate_probability_monte_carlo( ft.gates, p, c.samples, c.seed );
        report[ "monte_carlo" ] = { { "mean", mc.mean }, { "stddev", mc.stddev }, { "samples", mc.samples }, { "seed", c.seed } };
    }
    return { report };
}

Output diag_check_cmd( const Config& c )
{
    const auto m = load_model( c.model );
    Output o{ { { "results", json::array() }, { "skipped", json::array() } } };
    for ( const auto& s : selected_specs( m, c ) )
    {
        if ( s.diag == fdi::DiagScope::trace )
        {
            o.report[ "skipped" ].push_back( { { "alarm", s.alarm }, { "reason", "trace-scoped; see trace-diag" } } );
            continue;
        }
        const auto r = diag::check_diagnosability( m, s );
        o.report[ "results" ].push_back( diag::to_json( m, s, r ) );
        if ( !r.diagnosable )
            o.code = property_fails;
    }
    if ( o.report[ "results" ].empty() )
        throw UsageError( "no globally scoped alarm to check" );
    return o;
}

Output trace_diag_cmd( const Config& c )
{
    const auto m = load_model( c.model );
    const auto tr = load_state_trace( m, c.trace );
    Output o{ { { "at", c.at }, { "trace", names_json( m, tr ) }, { "results", json::array() } } };
    for ( const auto& s : selected_specs( m, c ) )
    {
        if ( s.diag != fdi::DiagScope::trace )
            continue;
        const auto r = diag::check_trace_diagnosability( m, s, tr, c.at );
        auto j = diag::to_json( m, r );
        j[ "alarm" ] = s.alarm;
        o.report[ "results" ].push_back( std::move( j ) );
        if ( !r.diagnosable )
            o.code = property_fails;
    }
    if ( o.report[ "results" ].empty() )
        throw UsageError( "no trace-scoped alarm to check" );
    return o;
}

Output synth_diagnoser_cmd( const Config& c )
{
    const auto m = load_model( c.model );
    const auto specs = selected_specs( m, c );
    const auto d = synth::synthesize_diagnoser( m, specs );
    return { synth::diagnoser_to_json( d ), synth::export_diagnoser_dot( d ) };
}

Output run_diagnoser_cmd( const Config& c )
{
    const auto d = synth::load_diagnoser( c.diagnoser );
    const auto j = load_json( c.trace );
    std::vector< Observation > obs;
    if ( j.is_object() && j.contains( "observations" ) )
    {
        if ( !j[ "observations" ].is_array() )
            throw UsageError( c.trace + ": 'observations' must be a list" );
        for ( const auto& o : j[ "observations" ] )
            obs.push_back( synth::observation_from_json( d, o ) );
    }
    else
    {
        if ( c.model.empty() )
            throw UsageError( "--model is required to run a state trace" );
        const auto m = load_model( c.model );
        for ( auto o : observation_sequence( m, load_state_trace( m, c.trace ) ) )
            obs.push_back( synth::to_diagnoser_observation( m, d, o ) );
    }
    const auto alarms = synth::run_diagnoser( d, obs );
    json steps = json::array();
    for ( std::size_t k = 0; k < obs.size(); ++k )
        steps.push_back( { { "step", k }, { "observation", synth::observation_to_json( d, obs[ k ] ) }, { "alarms", alarms[ k ] } } );
    return { { { "steps", steps } } };
}

Output verify_diagnoser_cmd( const Config& c )
{
    const auto m = load_model( c.model );
    const auto d = synth::load_diagnoser( c.diagnoser );
    Output o{ { { "verdicts", json::array() } } };
    for ( const auto& s : selected_specs( m, c ) )
    {
        const auto v = synth::verify_diagnoser( m, d, s );
        o.report[ "verdicts" ].push_back( synth::to_json( m, v ) );
        if ( !v.holds() )
            o.code = property_fails;
    }
    return o;
}

json findings_json( const std::vector< tfpg::Finding >& findings )
{
    json out = json::array();
    for ( const auto& f : findings )
        out.push_back( { { "kind", tfpg::to_string( f.kind ) },
                         { "subject", f.subject },
                         { "message", f.message },
                         { "severity", f.is_error() ? "error" : "warning" } } );
    return out;
}

Output tfpg_validate_cmd( const Config& c )
{
    const auto g = tfpg::load_tfpg( c.tfpg );
    const auto findings = tfpg::validate_structure( g );
    const bool valid = std::none_of( findings.begin(), findings.end(), []( const auto& f ) { return f.is_error(); } );
    return { { { "valid", valid }, { "findings", findings_json( findings ) } },
             tfpg::export_tfpg_dot( g ),
             valid ? ok : property_fails };
}

json violations_json( const std::vector< tfpg::TraceViolation >& vs )
{
    json out = json::array();
    for ( const auto& v : vs )
        out.push_back( { { "node", v.node }, { "kind", v.kind }, { "message", v.message } } );
    return out;
}

Output tfpg_check_trace_cmd( const Config& c )
{
    const auto g = tfpg::load_tfpg( c.tfpg );
    const auto at = tfpg::activation_trace_from_json( load_json( c.trace ) );
    const auto vs = tfpg::check_trace_consistency( g, at );
    return { { { "consistent", vs.empty() }, { "violations", violations_json( vs ) } },
             std::nullopt,
             vs.empty() ? ok : property_fails };
}

Output tfpg_behavioral_cmd( const Config& c )
{
    const auto g = tfpg::load_tfpg( c.tfpg );
    const auto m = load_model( c.model );
    const auto h = required_horizon( c );
    const auto r = tfpg::behavioral_validate( g, m, node_map( m, g, c ), h );
    json report{ { "complete", r.complete }, { "horizon", h }, { "violations", violations_json( r.violations ) } };
    if ( r.complete )
        report[ "traces" ] = r.traces;
    if ( r.witness )
    {
        report[ "witness" ] = names_json( m, *r.witness );
        report[ "activation_trace" ] = tfpg::to_json( tfpg::induced_activation_trace( m, g, node_map( m, g, c ), *r.witness ) );
    }
    return { report, std::nullopt, r.complete ? ok : property_fails };
}

Output tfpg_tighten_cmd( const Config& c, std::ostream& err )
{
    const auto g = tfpg::load_tfpg( c.tfpg );
    const auto m = load_model( c.model );
    const auto r = tfpg::tighten_edges( g, m, node_map( m, g, c ), required_horizon( c ) );
    for ( const auto& e : r.never_exercised )
        err << "note: " << e << '\n';
    return { tfpg::tfpg_to_json( r.graph ), tfpg::export_tfpg_dot( r.graph ) };
}

Output tfpg_synth_cmd( const Config& c, std::ostream& err )
{
    const auto m = load_model( c.model );
    const auto request = tfpg::synthesis_request_from_json( m, load_json( c.map ) );
    const auto r = tfpg::synthesize_tfpg( m, request, required_horizon( c ) );
    for ( const auto& f : r.findings )
        err << "note: " << f << '\n';
    return { tfpg::tfpg_to_json( r.graph ), tfpg::export_tfpg_dot( r.graph ) };
}

void write_output( const Output& o, const Config& c, std::ostream& out )
{
    std::ostringstream text;
    if ( c.format == "json" )
        text << o.report.dump( 2 ) << '\n';
    else if ( c.format == "text" )
        render_text( o.report, text, 0 );
    else if ( o.dot )
        text << *o.dot;
    else
        throw UsageError( "this subcommand has no dot output" );

    if ( c.out.empty() )
    {
        out << text.str();
        return;
    }
    std::ofstream file( c.out, std::ios::binary );
    if ( !file )
        throw UsageError( "cannot write " + c.out );
    file << text.str();
}

} // namespace

int run( std::span< const std::string > args, std::ostream& out, std::ostream& err )
{
    Config c;
    CLI::App app{ "Model-based safety analysis: fault trees, diagnosability, diagnosers and TFPGs", "mbsa" };
    app.require_subcommand( 1 );
    app.fallthrough();
    app.add_option( "--jobs", c.jobs, "Worker threads (default: all cores)" )->check( CLI::PositiveNumber );
    app.add_option( "--out", c.out, "Write the report here instead of stdout" );
    app.add_option( "--format", c.format, "Output format" )->check( CLI::IsMember( { "json", "dot", "text" } ) );

    std::function< Output() > action;
    auto sub = [ & ]( const char* name, const char* help, auto body ) {
        auto* s = app.add_subcommand( name, help );
        s->callback( [ &action, body ] { action = body; } );
        return s;
    };
    auto model = []( CLI::App* s, Config& cfg, bool required = true ) {
        auto* o = s->add_option( "--model", cfg.model, "System model (JSON)" )->check( CLI::ExistingFile );
        if ( required )
            o->required();
    };
    auto file = []( CLI::App* s, const char* flag, std::string& into, const char* help, bool required = true ) {
        auto* o = s->add_option( flag, into, help )->check( CLI::ExistingFile );
        if ( required )
            o->required();
    };
    auto alarm = []( CLI::App* s, Config& cfg ) { s->add_option( "--alarm", cfg.alarm, "Only this alarm from the spec file" ); };
    auto horizon = []( CLI::App* s, Config& cfg ) {
        s->add_option( "--horizon", cfg.horizon, "Number of trace states" )->required()->check( CLI::PositiveNumber );
    };

    {
        auto* s = sub( "validate-model", "Check model well-formedness", [ & ] { return validate_model_cmd( c ); } );
        model( s, c );
    }
    {
        auto* s = sub( "mcs", "Minimal cut sets of a top level event", [ & ] { return mcs_cmd( c ); } );
        model( s, c );
        s->add_option( "--tle", c.tle, "Top level event predicate" )->required();
    }
    {
        auto* s = sub( "fault-tree", "Two-level fault tree from the minimal cut sets", [ & ] { return fault_tree_cmd( c ); } );
        model( s, c, false );
        s->add_option( "--tle", c.tle, "Top level event predicate" );
        file( s, "--tree", c.tree, "Previously emitted fault tree", false );
    }
    {
        auto* s = sub( "ft-prob", "Top event probability", [ & ] { return ft_prob_cmd( c ); } );
        model( s, c, false );
        s->add_option( "--tle", c.tle, "Top level event predicate" );
        file( s, "--tree", c.tree, "Previously emitted fault tree", false );
        file( s, "--probs", c.probs, "Basic event probabilities (JSON object)" );
        s->add_option( "--samples", c.samples, "Monte Carlo samples (0 = exact only)" );
        s->add_option( "--seed", c.seed, "Monte Carlo seed" );
    }
    {
        auto* s = sub( "diag-check", "Diagnosability of globally scoped alarms", [ & ] { return diag_check_cmd( c ); } );
        model( s, c );
        file( s, "--spec", c.spec, "Alarm specifications (JSON)" );
        alarm( s, c );
    }
    {
        auto* s = sub( "trace-diag", "Diagnosability along one trace", [ & ] { return trace_diag_cmd( c ); } );
        model( s, c );
        file( s, "--spec", c.spec, "Alarm specifications (JSON)" );
        file( s, "--trace", c.trace, "State trace (JSON list of state names)" );
        s->add_option( "--at", c.at, "Step of the occurrence to diagnose" )->required();
        alarm( s, c );
    }
    {
        auto* s = sub( "synth-diagnoser", "Synthesize a diagnoser", [ & ] { return synth_diagnoser_cmd( c ); } );
        model( s, c );
        file( s, "--spec", c.spec, "Alarm specifications (JSON)" );
        alarm( s, c );
    }
    {
        auto* s = sub( "run-diagnoser", "Run a diagnoser on a trace", [ & ] { return run_diagnoser_cmd( c ); } );
        file( s, "--diagnoser", c.diagnoser, "Diagnoser (JSON)" );
        file( s, "--trace", c.trace, "State trace, or {\"observations\": [...]}" );
        model( s, c, false );
    }
    {
        auto* s = sub( "verify-diagnoser", "Check a diagnoser against its alarm specifications",
                       [ & ] { return verify_diagnoser_cmd( c ); } );
        model( s, c );
        file( s, "--spec", c.spec, "Alarm specifications (JSON)" );
        file( s, "--diagnoser", c.diagnoser, "Diagnoser (JSON)" );
        alarm( s, c );
    }
    {
        auto* s = sub( "tfpg-validate", "Structural checks of a TFPG", [ & ] { return tfpg_validate_cmd( c ); } );
        file( s, "--tfpg", c.tfpg, "TFPG (JSON)" );
    }
    {
        auto* s = sub( "tfpg-check-trace", "Consistency of an activation trace", [ & ] { return tfpg_check_trace_cmd( c ); } );
        file( s, "--tfpg", c.tfpg, "TFPG (JSON)" );
        file( s, "--trace", c.trace, "Activation trace (JSON)" );
    }
    {
        auto* s = sub( "tfpg-behavioral", "Completeness of a TFPG against a model", [ & ] { return tfpg_behavioral_cmd( c ); } );
        file( s, "--tfpg", c.tfpg, "TFPG (JSON)" );
        model( s, c );
        file( s, "--map", c.map, "Node map (defaults to the one embedded in the TFPG)", false );
        horizon( s, c );
    }
    {
        auto* s = sub( "tfpg-tighten", "Narrow edge delays to the model's behavior",
                       [ & ] { return tfpg_tighten_cmd( c, err ); } );
        file( s, "--tfpg", c.tfpg, "TFPG (JSON)" );
        model( s, c );
        file( s, "--map", c.map, "Node map (defaults to the one embedded in the TFPG)", false );
        horizon( s, c );
    }
    {
        auto* s = sub( "tfpg-synth", "Synthesize a TFPG from a model", [ & ] { return tfpg_synth_cmd( c, err ); } );
        model( s, c );
        file( s, "--map", c.map, "Synthesis request: failure modes, discrepancies, modes" );
        horizon( s, c );
    }

    try
    {
        std::vector< std::string > reversed( args.rbegin(), args.rend() );
        app.parse( reversed );
    }
    catch ( const CLI::CallForHelp& )
    {
        out << app.help();
        return ok;
    }
    catch ( const CLI::ParseError& e )
    {
        err << "error: " << e.what() << "\n\n" << app.help();
        return usage_error;
    }

    if ( c.jobs > 0 )
        omp_set_num_threads( c.jobs );
    try
    {
        const auto o = action();
        write_output( o, c, out );
        return o.code;
    }
    catch ( const std::exception& e )
    {
        err << "error: " << e.what() << '\n';
        return usage_error;
    }
}

} // namespace mbsa::cli
