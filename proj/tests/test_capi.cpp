// Exercises the shared-library C interface end to end.
#include <effdim.h>

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {
std::string tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "effdim_capi";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}
} // namespace

TEST_CASE("capi: version and catalog") {
    CHECK(std::strlen(effdim_version()) > 0);
    REQUIRE(effdim_model_count() == 5);
    char name[64];
    CHECK(effdim_model_name(0, name, sizeof name) == EFFDIM_OK);
    CHECK(std::string(name) == "msp_full");
    int ns = 0, np = 0;
    CHECK(effdim_model_dims("toy_enzyme", &ns, &np) == EFFDIM_OK);
    CHECK(ns == 4);
    CHECK(np == 3);
}

TEST_CASE("capi: errors carry codes and a message") {
    int ns, np;
    int st = effdim_model_dims("not_a_model", &ns, &np);
    CHECK(st == EFFDIM_ERR_UNSUPPORTED_MODEL);
    CHECK(std::strlen(effdim_last_error()) > 0);

    double eta;
    CHECK(effdim_effectiveness_factor(-1.0, 1.0, &eta) == EFFDIM_ERR_INVALID_ARGUMENT);
    CHECK(effdim_effectiveness_factor(1.0, 1e8, &eta) == EFFDIM_OK);
    CHECK(std::abs(eta - 0.671636489980357) < 1e-7);
}

TEST_CASE("capi: simulate matches the known compartmental solution") {
    double params[4] = {1, 1, 1, 1};
    double ic[2] = {1, 0};
    double times[3] = {0.0, 0.5, 1.0};
    double states[6];
    REQUIRE(effdim_model_simulate("compartmental_2", params, ic, times, 3, 0, 1e-10, 1e-12,
                                  states) == EFFDIM_OK);
    // x1(t) = (exp(-t) + exp(-3t)) / 2 for this symmetric parameter point
    CHECK(std::abs(states[2] - 0.5 * (std::exp(-0.5) + std::exp(-1.5))) < 1e-8);
    CHECK(std::abs(states[4] - 0.5 * (std::exp(-1.0) + std::exp(-3.0))) < 1e-8);
}

TEST_CASE("capi: dataset -> dmaps -> nystrom round trip") {
    double base[4] = {1, 1, 1, 1};
    double ic[2] = {1, 0};
    std::vector<double> times;
    for (int i = 1; i <= 10; ++i) times.push_back(0.5 * i);
    effdim_dataset* ds = nullptr;
    REQUIRE(effdim_dataset_build_transient("compartmental_2", base, 0, 0.1, 200, 11, ic, 0,
                                           times.data(), 10, 0, &ds) == EFFDIM_OK);
    int rows, in_cols, out_cols;
    REQUIRE(effdim_dataset_shape(ds, &rows, &in_cols, &out_cols) == EFFDIM_OK);
    CHECK(rows == 200);
    CHECK(in_cols == 4);
    CHECK(out_cols == 10);

    auto dir = tmp_path("ds");
    CHECK(effdim_dataset_save(ds, dir.c_str()) == EFFDIM_OK);
    effdim_dataset* back = nullptr;
    CHECK(effdim_dataset_load(dir.c_str(), &back) == EFFDIM_OK);
    std::vector<double> a(static_cast<size_t>(rows) * in_cols), b(a.size());
    effdim_dataset_inputs(ds, a.data());
    effdim_dataset_inputs(back, b.data());
    CHECK(a == b);

    std::vector<double> outputs(static_cast<size_t>(rows) * out_cols);
    effdim_dataset_outputs(ds, outputs.data());
    effdim_embedding* emb = nullptr;
    REQUIRE(effdim_dmaps_fit(nullptr, rows, 0, outputs.data(), out_cols, "plain_output", 0.0,
                             4.0, 1.0, 6, 0.2, &emb) == EFFDIM_OK);
    int n = 0, k1 = 0;
    effdim_embedding_shape(emb, &n, &k1);
    CHECK(n == 200);
    CHECK(k1 == 7);
    std::vector<double> lam(static_cast<size_t>(k1));
    effdim_embedding_eigenvalues(emb, lam.data());
    CHECK(std::abs(lam[0] - 1.0) < 1e-9);

    // restriction of a training row reproduces its coordinates
    std::vector<double> phi(static_cast<size_t>(k1));
    std::vector<double> row0(outputs.begin(), outputs.begin() + out_cols);
    REQUIRE(effdim_nystrom_extend(emb, nullptr, row0.data(), phi.data()) == EFFDIM_OK);
    std::vector<double> vecs(static_cast<size_t>(n) * k1);
    effdim_embedding_eigenvectors(emb, vecs.data());
    for (int j = 0; j < k1; ++j)
        CHECK(std::abs(phi[static_cast<size_t>(j)] - vecs[static_cast<size_t>(j)]) < 1e-7);

    effdim_embedding_free(emb);
    effdim_dataset_free(ds);
    effdim_dataset_free(back);
}

TEST_CASE("capi: gh fit/eval/gradient and invertibility audit") {
    const int n = 150;
    std::vector<double> coords(n * 2), values(n * 2);
    for (int i = 0; i < n; ++i) {
        double x = (i % 15) / 14.0, y = (i / 15) / 9.0;
        coords[2 * i] = x;
        coords[2 * i + 1] = y;
        values[2 * i] = x + 0.5 * y;
        values[2 * i + 1] = y - 0.25 * x;
    }
    effdim_gh* gh = nullptr;
    REQUIRE(effdim_gh_fit(coords.data(), n, 2, values.data(), 2, 0.0, 1e-10, &gh) == EFFDIM_OK);
    double q[2] = {0.4, 0.5};
    double v[2];
    CHECK(effdim_gh_eval(gh, q, v) == EFFDIM_OK);
    CHECK(std::abs(v[0] - 0.65) < 1e-2);
    double jac[4];
    CHECK(effdim_gh_gradient(gh, q, jac) == EFFDIM_OK);
    CHECK(std::abs(jac[0] - 1.0) < 0.05);

    std::vector<double> dets(n);
    int consistent = 0;
    double min_abs = 0;
    CHECK(effdim_audit_invertibility_gh(gh, coords.data(), n, 0, dets.data(), &consistent,
                                        &min_abs) == EFFDIM_OK);
    CHECK(consistent == 1);

    auto stem = tmp_path("gh_model");
    CHECK(effdim_gh_save(gh, stem.c_str()) == EFFDIM_OK);
    effdim_gh* back = nullptr;
    CHECK(effdim_gh_load(stem.c_str(), &back) == EFFDIM_OK);
    double v2[2];
    CHECK(effdim_gh_eval(back, q, v2) == EFFDIM_OK);
    CHECK(v2[0] == v[0]);
    effdim_gh_free(gh);
    effdim_gh_free(back);
}

TEST_CASE("capi: spiral, jsf, injectivity, nullspace") {
    const int n = 500;
    std::vector<double> s1(n * 2), s2(n * 2), z(n), c(n);
    REQUIRE(effdim_generate_spiral(n, 3, s1.data(), s2.data(), z.data(), c.data()) == EFFDIM_OK);
    effdim_jsf* jsf = nullptr;
    REQUIRE(effdim_jsf_compute(s1.data(), n, 2, s2.data(), 2, 10, 0, &jsf) == EFFDIM_OK);
    int rows = 0, m = 0, n_sing = 0;
    effdim_jsf_shape(jsf, &rows, &m, &n_sing);
    CHECK(rows == n);
    CHECK(m == 10);
    std::vector<double> sing(static_cast<size_t>(n_sing));
    effdim_jsf_singular_values(jsf, sing.data());
    CHECK(sing[0] <= std::sqrt(2.0) + 1e-9);
    effdim_jsf_free(jsf);

    // trivially injective data has no violating pairs
    std::vector<double> pairs(64);
    int count = 32;
    std::vector<int> pair_idx(64);
    CHECK(effdim_injectivity_scan(s1.data(), n, 2, s1.data(), 2, 1e-9, 1e-3, pair_idx.data(),
                                  &count) == EFFDIM_OK);
    CHECK(count == 0);

    double point[4] = {1, 1, 1, 1};
    double ic[2] = {1, 0};
    std::vector<double> times;
    for (int i = 1; i <= 10; ++i) times.push_back(0.5 * i);
    double sv[4], basis[16];
    int null_dim = 0;
    REQUIRE(effdim_sensitivity_nullspace("compartmental_2", point, ic, 0, times.data(), 10, 0,
                                         0, 0, sv, basis, &null_dim) == EFFDIM_OK);
    CHECK(null_dim == 1);
}

TEST_CASE("capi: experiment run via config file") {
    auto conf = tmp_path("spiral.conf");
    auto out = tmp_path("spiral_run");
    std::filesystem::remove_all(out);
    std::ofstream os(conf);
    os << "experiment = spiral_jsf\nout_dir = " << out << "\ncount = 300\njsf.m = 8\njsf.r = 30\n";
    os.close();
    int passed = 0;
    REQUIRE(effdim_experiment_run(conf.c_str(), nullptr, &passed) == EFFDIM_OK);
    CHECK(passed == 1);
    CHECK(std::filesystem::exists(out + "/report.json"));
    CHECK(effdim_report_emit(out.c_str()) == EFFDIM_OK);

    CHECK(effdim_experiment_run("/nonexistent.conf", nullptr, &passed) == EFFDIM_ERR_IO);
}

TEST_CASE("capi: csv helpers round trip") {
    auto path = tmp_path("m.csv");
    double data[6] = {1, 2, 3, 4, 5, 6};
    REQUIRE(effdim_write_matrix_csv(path.c_str(), data, 2, 3) == EFFDIM_OK);
    int rows = 0, cols = 0;
    double* back = nullptr;
    REQUIRE(effdim_read_matrix_csv(path.c_str(), &rows, &cols, &back) == EFFDIM_OK);
    CHECK(rows == 2);
    CHECK(cols == 3);
    for (int i = 0; i < 6; ++i) CHECK(back[i] == data[i]);
    effdim_free(back);
}
