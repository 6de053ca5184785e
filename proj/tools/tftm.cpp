// tftm: command-line front end.
//
//   tftm synth      -c cfg.ini
//   tftm prepare    -c cfg.ini
//   tftm train      -c cfg.ini [--max-epochs N] [--seed S]
//   tftm evaluate   -c cfg.ini [--predictions file.csv] [--checkpoint model.ckpt]
//   tftm baseline   -c cfg.ini
//   tftm importance -c cfg.ini [--checkpoint model.ckpt]
//   tftm whatif     -c cfg.ini [--checkpoint model.ckpt] [--limit N]
//   tftm serve      -c cfg.ini [--checkpoint model.ckpt] [--host H] [--port P]
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 unreadable or refused file, 4 numerical failure.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tftm/http_server.hpp"
#include "tftm/pipeline.hpp"

namespace {

struct Args {
    std::string config;
    std::string checkpoint;
    std::string predictions;
    std::string host;
    int port = 0;
    int max_epochs = 0;
    long long seed = -1;
    std::size_t limit = 0;
};

int serve(const tftm::Settings& s, const Args& a) {
    auto ds = tftm::load_dataset(s.dataset);
    auto model = tftm::load_checkpoint<float>(a.checkpoint.empty() ? s.checkpoint() : a.checkpoint);
    tftm::ServiceOptions opts;
    opts.channel = s.channel;
    opts.target = s.target;
    opts.bin_minutes = s.bin_minutes;
    tftm::ForecastService service(std::move(model), ds.test.windows, opts);
    httplib::Server server;
    tftm::mount(server, service);
    const std::string host = a.host.empty() ? s.host : a.host;
    const int port = a.port ? a.port : s.port;
    tftm::Manifest man(s, "serve");
    man.note("host", host);
    man.note("port", port);
    man.note("fingerprint", service.model().fingerprint());
    man.write();
    std::cout << "serving on http://" << host << ":" << port << " (fingerprint " << service.model().fingerprint() << ")"
              << std::endl;
    if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-target quantile forecasting with masked loss"};
    app.set_version_flag("--version", std::string(tftm::kVersion));
    app.require_subcommand(1);
    Args a;
    auto add = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", a.config, "config file")->required()->check(CLI::ExistingFile);
        return sub;
    };
    add("synth", "generate a synthetic cohort (events and statics CSV)");
    add("prepare", "resample events, build windows, split, write the dataset file");
    auto* train = add("train", "train the network; writes checkpoint and log");
    train->add_option("--max-epochs", a.max_epochs, "override [train] max_epochs");
    train->add_option("--seed", a.seed, "override [train] seed");
    auto* eval = add("evaluate", "metrics on the test split, or on an existing prediction file");
    eval->add_option("--predictions", a.predictions, "evaluate this prediction CSV instead of the model")->check(CLI::ExistingFile);
    eval->add_option("--checkpoint", a.checkpoint, "checkpoint to evaluate");
    add("baseline", "VAR baseline with Granger screening");
    auto* imp = add("importance", "aggregated variable-selection weights and attention profile");
    imp->add_option("--checkpoint", a.checkpoint, "checkpoint to use");
    auto* whatif = add("whatif", "forecasts under truth / all-ones / all-zeros treatment schedules");
    whatif->add_option("--checkpoint", a.checkpoint, "checkpoint trained with the treatment as known-future input");
    whatif->add_option("--limit", a.limit, "only the first N test subjects");
    auto* srv = add("serve", "HTTP forecast service");
    srv->add_option("--checkpoint", a.checkpoint, "checkpoint to serve");
    srv->add_option("--host", a.host, "bind address");
    srv->add_option("--port", a.port, "port");

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();
    auto log = [](const std::string& m) { std::cout << m << std::endl; };
    try {
        auto s = tftm::Settings::load(a.config);
        if (a.max_epochs > 0) {
            s.train.max_epochs = a.max_epochs;
            if (s.train.patience >= a.max_epochs) s.train.patience = a.max_epochs - 1;
        }
        if (a.seed >= 0) s.train.seed = static_cast<std::uint64_t>(a.seed);
        std::string manifest;
        if (cmd == "synth") manifest = tftm::run_synth(s, log);
        else if (cmd == "prepare") manifest = tftm::run_prepare(s, log);
        else if (cmd == "train") manifest = tftm::run_train(s, log);
        else if (cmd == "evaluate") manifest = tftm::run_evaluate(s, a.predictions, a.checkpoint, log);
        else if (cmd == "baseline") manifest = tftm::run_baseline(s, log);
        else if (cmd == "importance") manifest = tftm::run_importance(s, a.checkpoint, log);
        else if (cmd == "whatif") manifest = tftm::run_whatif(s, a.checkpoint, a.limit, log);
        else if (cmd == "serve") return serve(s, a);
        std::cout << "manifest: " << manifest << std::endl;
        return 0;
    } catch (const tftm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tftm::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const tftm::FormatError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return 3;
    } catch (const tftm::NumericError& e) {
        std::cerr << "numeric error at " << e.where() << ": " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
