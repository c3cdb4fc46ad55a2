#include <iostream>
#include "cli_app.hpp"
#include "../tests/acceptance/suite.hpp"

int main(int argc, char** argv)
{
    using namespace l0bnb;
    cli::RunConfig cfg;
    cfg.log = cli::log_level_from_env();
    CLI::App app{"l0bnb: exact l0 + l2 regression by branch and bound"};
    cli::configure(app, cfg);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::exit_ok : cli::exit_error;
    }
    if (cfg.command == "bench") return acceptance::run_all(std::cout, cfg.only) ? cli::exit_ok : cli::exit_error;
    return cli::dispatch(cfg);
}
