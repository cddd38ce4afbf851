// Command-line front end: every invocation emits one report document
// (JSON or CSV) on stdout or into --out, exit code 0 on success and
// nonzero with a structured error object otherwise.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "subcurv/report.hpp"

namespace {

int emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return 0;
    }
    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
        std::cerr << "cannot open output file: " << out_path << "\n";
        return 1;
    }
    file << text;
    return file.good() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "subcurv: canonical curvature, diagram censuses and diameter bounds "
        "of sub-Riemannian models"};
    app.require_subcommand(1);

    subcurv::ReportOptions opt;
    std::string out_path;
    std::string format = "json";
    bool no_timestamp = false;

    const auto add_common = [&](CLI::App* sub, bool model_flags) {
        if (model_flags) {
            sub->add_option("--model", opt.model,
                            "zoo entry, e.g. heisenberg, contact3d(1), "
                            "quaternionic(2); or a JSON model path");
            sub->add_option("--connection", opt.connection,
                            "compatible connection to use")
                ->check(CLI::IsMember({"nice", "group"}));
            sub->add_option("--samples", opt.samples,
                            "number of sampled covectors")
                ->check(CLI::PositiveNumber);
            sub->add_option("--vertical-range", opt.vertical_range,
                            "radius of the sampled vertical momenta");
        }
        sub->add_option("--seed", opt.seed, "seed of the covector sampler");
        sub->add_option("--t-max", opt.t_max,
                        "time horizon of conjugate-time searches");
        sub->add_option("--tol", opt.tol, "pipeline tolerance");
        sub->add_option("--out", out_path, "write the report to this file");
        sub->add_option("--format", format, "output format")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->add_flag("--no-timestamp", no_timestamp,
                      "omit the timestamp field (byte-reproducible output)");
    };

    CLI::App* classify = app.add_subcommand(
        "classify", "Young-diagram census over sampled covectors");
    add_common(classify, true);
    CLI::App* ricci = app.add_subcommand(
        "ricci", "canonical Ricci curvature of sampled covectors");
    add_common(ricci, true);
    CLI::App* bonnet = app.add_subcommand(
        "bonnet-myers", "diameter bound from sampled curvature infima");
    add_common(bonnet, true);
    CLI::App* lq = app.add_subcommand(
        "lq", "conjugate time of a constant-potential comparison problem");
    add_common(lq, false);
    lq->add_option("--columns", opt.lq_columns,
                   "Young-diagram column heights, e.g. 2,1")
        ->delimiter(',');
    lq->add_option("--potential", opt.lq_potential,
                   "curvature value per diagram column, e.g. 1.0,0.0")
        ->delimiter(',');
    CLI::App* validate = app.add_subcommand(
        "validate", "normalization and connection-identity residuals");
    add_common(validate, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            const subcurv::JsonValue doc = subcurv::error_document(
                subcurv::ErrorKind::Parse, e.what());
            std::cout << subcurv::render_report(doc, "json");
        }
        return app.exit(e);
    }
    opt.timestamp = !no_timestamp;

    try {
        subcurv::JsonValue doc;
        if (classify->parsed()) doc = subcurv::cmd_classify(opt);
        else if (ricci->parsed()) doc = subcurv::cmd_ricci(opt);
        else if (bonnet->parsed()) doc = subcurv::cmd_bonnet_myers(opt);
        else if (lq->parsed()) doc = subcurv::cmd_lq(opt);
        else doc = subcurv::cmd_validate(opt);
        return emit(subcurv::render_report(doc, format), out_path);
    } catch (const subcurv::Error& e) {
        const subcurv::JsonValue doc =
            subcurv::error_document(e.kind(), e.what());
        emit(subcurv::render_report(doc, "json"), out_path);
        return 2;
    } catch (const std::exception& e) {
        const subcurv::JsonValue doc = subcurv::error_document(
            subcurv::ErrorKind::Invalid, e.what());
        emit(subcurv::render_report(doc, "json"), out_path);
        return 3;
    }
}
