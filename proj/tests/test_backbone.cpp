#include <catch2/catch_amalgamated.hpp>

#include <opencv2/imgcodecs.hpp>

#include "iconsim/backbone.hpp"
#include "support.hpp"

using namespace iconsim;

TEST_CASE("preprocess yields a mean-subtracted channel-first tensor", "[backbone]") {
    std::mt19937_64 rng(1);
    const cv::Mat rgb = testing_support::random_rgb(rng, 16, 16);
    PreprocessOptions opts{16, kImageNetMeans};
    const auto img = preprocess(rgb, opts);
    REQUIRE(img.size == 16);
    REQUIRE(img.data.size() == 3u * 16 * 16);
    // Same size: no resampling, exact per-pixel values.
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(img.at(c, y, x) == static_cast<float>(rgb.at<cv::Vec3b>(y, x)[c]) - kImageNetMeans[c]);
}

TEST_CASE("preprocess resizes to the input size", "[backbone]") {
    cv::Mat flat(40, 25, CV_8UC3, cv::Scalar(10, 20, 30));
    const auto img = preprocess(flat, {32, {0.0f, 0.0f, 0.0f}});
    REQUIRE(img.size == 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(img.at(0, y, x) == Catch::Approx(10.0f));
            CHECK(img.at(2, y, x) == Catch::Approx(30.0f));
        }
}

TEST_CASE("gray and alpha images become RGB", "[backbone]") {
    cv::Mat gray(8, 8, CV_8UC1, cv::Scalar(77));
    const auto img = preprocess(gray, {8, {0, 0, 0}});
    CHECK(img.at(1, 3, 3) == 77.0f);

    cv::Mat rgba(8, 8, CV_8UC4, cv::Scalar(1, 2, 3, 255));
    const auto img2 = preprocess(rgba, {8, {0, 0, 0}});
    CHECK(img2.at(0, 0, 0) == 1.0f);
    CHECK(img2.at(2, 0, 0) == 3.0f);

    cv::Mat wide(8, 8, CV_16UC3, cv::Scalar(65535, 0, 0));
    CHECK(to_rgb8(wide, false).at<cv::Vec3b>(0, 0)[0] == 255);
    CHECK_THROWS_AS(to_rgb8(cv::Mat(4, 4, CV_32FC2), false), Error);
}

TEST_CASE("decode_image returns RGB order", "[backbone]") {
    testing_support::TempDir dir;
    cv::Mat bgr(4, 4, CV_8UC3, cv::Scalar(255, 0, 0));  // pure blue in BGR
    cv::imwrite((dir / "b.png").string(), bgr);
    const auto rgb = decode_image(dir / "b.png");
    CHECK(rgb.at<cv::Vec3b>(0, 0)[2] == 255);
    CHECK(rgb.at<cv::Vec3b>(0, 0)[0] == 0);
    CHECK_THROWS_AS(decode_image(dir / "missing.png"), Error);
}

TEST_CASE("stub backbone shapes and determinism", "[backbone]") {
    const StubBackbone a, b;
    REQUIRE(a.info().style_filters == 8);
    REQUIRE(a.info().style_positions == 16);
    REQUIRE(a.info().content_dim == 32);
    std::mt19937_64 rng(2);
    const auto img = preprocess(testing_support::random_rgb(rng, 64, 64), a.info().preprocess_options());
    const auto oa = a.extract(img);
    const auto ob = b.extract(img);
    CHECK(oa.content == ob.content);
    CHECK(oa.style == ob.style);
    CHECK(oa.style.filters == 8);
    CHECK(oa.style.positions == 16);
    for (float v : oa.content) CHECK(v >= 0.0f);

    const StubBackbone other(StubOptions{8});
    CHECK(other.extract(img).content != oa.content);
}

TEST_CASE("stub backbone with zero weights outputs zeros", "[backbone]") {
    StubOptions opts;
    opts.zero_weights = true;
    const StubBackbone zero(opts);
    std::mt19937_64 rng(3);
    const auto out = zero.extract(preprocess(testing_support::random_rgb(rng, 64, 64), zero.info().preprocess_options()));
    for (float v : out.content) CHECK(v == 0.0f);
    for (float v : out.style.values) CHECK(v == 0.0f);
}

TEST_CASE("stub style positions only see their own input block", "[backbone]") {
    const StubBackbone net;
    std::mt19937_64 rng(4);
    auto img = preprocess(testing_support::random_rgb(rng, 64, 64), net.info().preprocess_options());
    const auto before = net.extract(img);
    // Perturb block (row 1, col 2) only.
    for (int c = 0; c < 3; ++c)
        for (int y = 16; y < 32; ++y)
            for (int x = 32; x < 48; ++x) img.at(c, y, x) += 50.0f;
    const auto after = net.extract(img);
    const std::size_t touched = 1 * 4 + 2;
    for (std::size_t f = 0; f < 8; ++f)
        for (std::size_t p = 0; p < 16; ++p)
            if (p != touched) CHECK(after.style(f, p) == before.style(f, p));
}

TEST_CASE("backbone input checks", "[backbone]") {
    const StubBackbone net;
    PreprocessedImage wrong{32, kImageNetMeans, std::vector<float>(3 * 32 * 32, 0.0f)};
    CHECK_THROWS_AS(net.extract(wrong), Error);
    PreprocessedImage bad{64, kImageNetMeans, std::vector<float>(3 * 64 * 64, 0.0f)};
    bad.data[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(net.extract(bad), Error);
    CHECK_THROWS_AS(StubBackbone(StubOptions{7, 40}), Error);
}
