#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "linktopo/corpus.hpp"
#include "linktopo/lexparse.hpp"
#include "linktopo/stopwords_data.hpp"
#include "linktopo/url.hpp"
#include "linktopo/util.hpp"

using namespace linktopo;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "linktopo_test_text";
  fs::create_directories(dir);
  auto p = dir / name;
  fs::remove(p);
  return p;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no linktopo::Error thrown";
  return ErrorKind::Io;
}

PageRecord page(std::string url, int depth, TermCounts terms, std::vector<std::string> links = {}) {
  PageRecord r;
  r.url = std::move(url);
  r.topic_id = "t";
  r.depth = depth;
  r.term_counts = std::move(terms);
  r.outlinks = std::move(links);
  r.fetched_at = Timestamp{std::chrono::seconds{1000000000}};
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// util

TEST(Util, Iso8601RoundTrip) {
  Timestamp t{std::chrono::seconds{1234567890}};
  EXPECT_EQ(format_iso8601(t), "2009-02-13T23:31:30Z");
  EXPECT_EQ(parse_iso8601("2009-02-13T23:31:30Z"), t);
}

TEST(Util, DoubleFormatRoundTrips) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    double v = u(rng) / (1 + i);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}

TEST(Util, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

// ---------------------------------------------------------------------------
// url

TEST(NormalizeUrl, ResolvesRelativePath) {
  EXPECT_EQ(normalize_url("../a.html", "http://X.edu/b/c.html"), "http://x.edu/a.html");
}

TEST(NormalizeUrl, CanonicalizesSchemeHostPortFragment) {
  EXPECT_EQ(normalize_url("HTTP://X.edu:80/p#frag", "http://ignored.org/"), "http://x.edu/p");
  EXPECT_EQ(normalize_url("https://X.edu:443/", "http://a.org/"), "https://x.edu/");
  EXPECT_EQ(normalize_url("http://x.edu:8080/a", "http://a.org/"), "http://x.edu:8080/a");
}

TEST(NormalizeUrl, RejectsGarbage) {
  EXPECT_EQ(kind_of([] { normalize_url("ht!tp:::bad", "http://x.edu/"); }), ErrorKind::RejectedLink);
  EXPECT_EQ(kind_of([] { normalize_url("", "http://x.edu/"); }), ErrorKind::RejectedLink);
}

TEST(NormalizeUrl, DotSegmentsAndTrailingSlash) {
  EXPECT_EQ(normalize_url("./x/../y/", "http://h.org/a/b"), "http://h.org/a/y/");
  EXPECT_EQ(normalize_url("/a/./b/../c", "http://h.org/"), "http://h.org/a/c");
  EXPECT_EQ(normalize_url("http://h.org", "http://h.org/"), "http://h.org/");
  EXPECT_EQ(normalize_url("?q=1", "http://h.org/p"), "http://h.org/p?q=1");
  EXPECT_EQ(normalize_url("//o.net/z", "https://h.org/p"), "https://o.net/z");
}

TEST(NormalizeUrl, PathIsCaseSensitiveHostIsNot) {
  EXPECT_EQ(normalize_url("http://H.ORG/Path", "http://a.org/"), "http://h.org/Path");
  EXPECT_NE(normalize_url("http://h.org/Path", "http://a.org/"), normalize_url("http://h.org/path", "http://a.org/"));
}

TEST(NormalizeUrl, IdempotentOnRandomInputs) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> parts{"a", "..", ".", "B", "x.html", "", "%7e", "q?x=1", "#f", "Y"};
  const std::vector<std::string> bases{"http://Ex.COM/d/e/f.html", "https://h.org:443/", "http://h.net:81/a/"};
  for (int i = 0; i < 2000; ++i) {
    std::string raw = rng() % 3 == 0 ? "/" : "";
    auto n = rng() % 6;
    for (std::size_t k = 0; k < n; ++k) raw += parts[rng() % parts.size()] + (rng() % 2 ? "/" : "");
    if (raw.empty()) raw = "z";
    const auto& base = bases[rng() % bases.size()];
    std::string once;
    try {
      once = normalize_url(raw, base);
    } catch (const Error&) {
      continue;
    }
    EXPECT_EQ(normalize_url(once, base), once) << raw;
    EXPECT_EQ(normalize_url(once, "http://other.org/"), once) << raw;
  }
}

TEST(Url, HostAndTld) {
  EXPECT_EQ(url_host("http://www.Cs.UIOWA.edu/x"), "www.cs.uiowa.edu");
  EXPECT_EQ(url_tld("http://www.cs.uiowa.edu/x"), "edu");
  EXPECT_EQ(url_tld("http://localhost:8080/"), "localhost");
}

// ---------------------------------------------------------------------------
// corpus

TEST(BuildCrawlSet, CumulativeCountsAndDocFreq) {
  std::vector<PageRecord> recs{page("http://s.org/", 0, {{"k", 1}, {"src", 2}})};
  for (int i = 0; i < 5; ++i) recs.push_back(page("http://a" + std::to_string(i) + ".com/", 1, {{"k", 1}}));
  for (int i = 0; i < 10; ++i) recs.push_back(page("http://b" + std::to_string(i) + ".com/", 2, {{"k", 3}}));
  auto cs = build_crawl_set(recs, 2);
  EXPECT_EQ(cs.cumulative_counts(), (std::vector<std::size_t>{1, 6, 16}));
  EXPECT_EQ(cs.doc_freq("k", 2), 16u);
  EXPECT_EQ(cs.doc_freq("k", 1), 6u);
  EXPECT_EQ(cs.doc_freq("src", 2), 1u);
  EXPECT_EQ(cs.doc_freq("absent", 2), 0u);
}

TEST(BuildCrawlSet, SourceOnly) {
  auto cs = build_crawl_set({page("http://s.org/", 0, {{"alpha", 3}, {"beta", 1}})}, 0);
  EXPECT_EQ(cs.cumulative_counts(), std::vector<std::size_t>{1});
  EXPECT_EQ(cs.doc_freq_table(0).size(), 2u);
  EXPECT_EQ(cs.doc_freq("alpha", 0), 1u);
  EXPECT_EQ(cs.doc_freq("beta", 0), 1u);
}

TEST(BuildCrawlSet, FailedFetchesExcluded) {
  std::vector<PageRecord> recs{page("http://s.org/", 0, {{"k", 1}}), page("http://a.com/", 1, {{"k", 1}}),
                               page("http://b.com/", 1, {})};
  recs[2].fetch_status = FetchStatus::timeout();
  auto cs = build_crawl_set(recs, 1);
  EXPECT_EQ(cs.count(1), 2u);
  EXPECT_EQ(cs.excluded_failures(), 1u);
  EXPECT_EQ(cs.find("http://b.com/"), nullptr);
}

TEST(BuildCrawlSet, MalformedInputs) {
  auto src = page("http://s.org/", 0, {});
  auto other = page("http://o.org/", 0, {});
  auto child = page("http://a.com/", 1, {});
  EXPECT_EQ(kind_of([&] { build_crawl_set({child}, 1); }), ErrorKind::MalformedCrawl);
  EXPECT_EQ(kind_of([&] { build_crawl_set({src, other}, 1); }), ErrorKind::MalformedCrawl);
  EXPECT_EQ(kind_of([&] { build_crawl_set({src, child}, 0); }), ErrorKind::MalformedCrawl);
  auto foreign = child;
  foreign.topic_id = "u";
  EXPECT_EQ(kind_of([&] { build_crawl_set({src, foreign}, 1); }), ErrorKind::MalformedCrawl);
}

TEST(BuildCrawlSet, MatchesBruteForceRecount) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    int depth = 1 + static_cast<int>(rng() % 3);
    std::vector<PageRecord> recs;
    auto terms = [&] {
      TermCounts t;
      for (int k = 0; k < 6; ++k)
        if (rng() % 2) t["t" + std::to_string(k)] = 1 + static_cast<int>(rng() % 4);
      return t;
    };
    recs.push_back(page("http://s.org/", 0, terms()));
    int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      auto r = page("http://p" + std::to_string(i) + ".com/", 1 + static_cast<int>(rng() % depth), terms());
      if (rng() % 7 == 0) r.fetch_status = FetchStatus::http_error(404);
      recs.push_back(r);
    }
    auto cs = build_crawl_set(recs, depth);
    for (int d = 0; d <= depth; ++d) {
      std::size_t count = 0;
      std::map<std::string, std::size_t> df;
      for (const auto& r : recs) {
        if (r.depth > d || !r.fetch_status.is_ok()) continue;
        ++count;
        for (const auto& [k, v] : r.term_counts) ++df[k];
      }
      EXPECT_EQ(cs.count(d), count);
      EXPECT_EQ(cs.doc_freq_table(d).size(), df.size());
      for (const auto& [k, v] : df) {
        EXPECT_EQ(cs.doc_freq(k, d), v);
        EXPECT_LE(v, count);
      }
      if (d > 0) EXPECT_GE(cs.count(d), cs.count(d - 1));
    }
  }
}

TEST(Store, RoundTripThreeRecords) {
  auto path = temp_file("three.jsonl").string();
  std::vector<PageRecord> recs{page("http://s.org/", 0, {{"web", 2}}, {"http://a.com/"}),
                               page("http://a.com/", 1, {{"graph", 1}}), page("http://b.com/", 1, {})};
  recs[2].fetch_status = FetchStatus::http_error(503);
  recs[1].redirected_from = "http://a.com/old";
  store_append(path, recs);
  auto back = store_load(path);
  EXPECT_EQ(back.records, recs);
  EXPECT_TRUE(back.warnings.empty());
}

TEST(Store, EmptyFile) {
  auto path = temp_file("empty.jsonl");
  std::ofstream(path).close();
  auto back = store_load(path.string());
  EXPECT_TRUE(back.records.empty());
  EXPECT_TRUE(back.warnings.empty());
}

TEST(Store, TruncatedFinalLineDroppedWithWarning) {
  auto path = temp_file("crash.jsonl").string();
  store_append(path, {page("http://s.org/", 0, {{"a", 1}}), page("http://a.com/", 1, {{"b", 1}})});
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"url":"http://c.com/","topic_id":"t","dep)";
  }
  auto back = store_load(path);
  EXPECT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.warnings.size(), 1u);
}

TEST(Store, MalformedMiddleLineNamesLine) {
  auto path = temp_file("bad.jsonl").string();
  store_append(path, {page("http://s.org/", 0, {})});
  { std::ofstream(path, std::ios::app) << "not json\n"; }
  store_append(path, {page("http://a.com/", 1, {})});
  try {
    store_load(path);
    FAIL() << "expected StoreFormat";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StoreFormat);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Store, CommentLinesSkipped) {
  auto path = temp_file("comments.jsonl").string();
  {
    StoreWriter w(path);
    w.comment("tool_version=x");
    w.append(page("http://s.org/", 0, {}));
  }
  auto back = store_load(path);
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0].url, "http://s.org/");
}

TEST(Store, RoundTripRandomRecords) {
  std::mt19937_64 rng(5);
  const std::vector<FetchStatus> statuses{FetchStatus::ok(), FetchStatus::timeout(), FetchStatus::http_error(404),
                                          FetchStatus::parse_error(), FetchStatus::skipped()};
  std::vector<PageRecord> recs;
  for (int i = 0; i < 200; ++i) {
    PageRecord r;
    r.url = "http://h" + std::to_string(rng() % 1000) + ".org/p\"" + std::to_string(i) + "\\ü";
    r.topic_id = "topic/" + std::to_string(rng() % 5);
    r.depth = static_cast<int>(rng() % 4);
    for (std::size_t k = 0, n = rng() % 5; k < n; ++k) r.outlinks.push_back("http://x" + std::to_string(k) + ".com/");
    for (std::size_t k = 0, n = rng() % 8; k < n; ++k) r.term_counts["w" + std::to_string(rng() % 50)] = 1 + static_cast<int>(rng() % 9);
    r.fetch_status = statuses[rng() % statuses.size()];
    r.fetched_at = Timestamp{std::chrono::seconds{static_cast<long long>(rng() % 2000000000)}};
    recs.push_back(r);
  }
  auto path = temp_file("random.jsonl").string();
  store_append(path, recs);
  EXPECT_EQ(store_load(path).records, recs);
}

TEST(Seeds, SaveLoadAndInvariants) {
  TopicSeed s{"t1", "Science/Physics", "http://dir.org/physics",
              {"http://a.com/", "http://b.com/", "http://c.com/", "http://d.com/", "http://e.com/"},
              {"http://a.com/", "http://b.com/", "http://c.com/", "http://d.com/", "http://e.com/", "http://f.com/"}};
  auto path = temp_file("seeds.json").string();
  save_seeds(path, {s});
  auto back = load_seeds(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], s);
  EXPECT_NO_THROW(check_seed(s));
  auto short_seed = s;
  short_seed.crawl_relevant_set.pop_back();
  EXPECT_EQ(kind_of([&] { check_seed(short_seed); }), ErrorKind::Precondition);
  auto stray = s;
  stray.crawl_relevant_set[0] = "http://zzz.com/";
  EXPECT_EQ(kind_of([&] { check_seed(stray); }), ErrorKind::Precondition);
}

// ---------------------------------------------------------------------------
// lexparse

TEST(ExtractLinks, DropsFragmentsAndMailto) {
  auto links = extract_links(R"(<a href="a.html">x</a><a href="#top">t</a><a href="mailto:x@y">m</a>)",
                             "http://h.org/dir/index.html");
  EXPECT_EQ(links, std::vector<std::string>{"http://h.org/dir/a.html"});
}

TEST(ExtractLinks, Deduplicates) {
  auto links = extract_links(R"(<a href="/a">1</a><A HREF='/a'>2</a><a href=/b>3</a>)", "http://h.org/");
  EXPECT_EQ(links, (std::vector<std::string>{"http://h.org/a", "http://h.org/b"}));
}

TEST(ExtractLinks, MalformedHtml) {
  auto links = extract_links(R"(<div><p><b><a href="http://x.com/p">unclosed <i>text <a href="q.html">more</div>)",
                             "http://h.org/");
  EXPECT_EQ(links, (std::vector<std::string>{"http://x.com/p", "http://h.org/q.html"}));
  EXPECT_TRUE(extract_links("<a href=", "http://h.org/").empty());
  EXPECT_TRUE(extract_links("<<<>>><a", "http://h.org/").empty());
}

TEST(ExtractLinks, SkipsScriptsCommentsAndBadUrls) {
  auto links = extract_links(
      R"x(<script>var s = '<a href="/js">';</script><!-- <a href="/c"> --><a href="javascript:void(0)">j</a>)x"
      R"x(<a href="ht!tp:::bad">b</a><a href="ftp://f.org/">f</a><a href="https://s.org/ok">k</a>)x",
      "http://h.org/");
  EXPECT_EQ(links, std::vector<std::string>{"https://s.org/ok"});
}

TEST(ExtractLinks, OutputsAreNormalizationFixedPoints) {
  std::mt19937_64 rng(9);
  const std::vector<std::string> hrefs{"a.html", "../b/", "/c/./d", "HTTP://X.ORG:80/e#f", "?q", "g/../h", "//k.net"};
  for (int i = 0; i < 200; ++i) {
    std::string html;
    for (int k = 0; k < 5; ++k) html += "<a href=\"" + hrefs[rng() % hrefs.size()] + "\">x</a>";
    for (const auto& l : extract_links(html, "http://h.org/x/y.html")) EXPECT_EQ(normalize_url(l, l), l);
  }
}

TEST(Tokenize, BasicWords) {
  EXPECT_EQ(tokenize("<b>Web</b> Crawling!"), (TokenStream{"web", "crawling"}));
}

TEST(Tokenize, AllStopWords) { EXPECT_TRUE(tokenize("the and of").empty()); }

TEST(Tokenize, ScriptAndStyleExcluded) {
  auto t = tokenize("<script>hidden payload()</script><style>.klass{color:red}</style>visible words");
  EXPECT_EQ(t, (TokenStream{"visible", "words"}));
}

TEST(Tokenize, ShortTokensAndNonAlphaSplit) {
  EXPECT_EQ(tokenize("ab abc x9yz42 Graph-Theory"), (TokenStream{"abc", "graph", "theory"}));
}

TEST(Tokenize, TitleAndMetaDescriptionIncludedAltExcluded) {
  auto t = tokenize(R"(<html><head><title>Quantum Physics</title>)"
                    R"(<meta name="description" content="Particle research"></head>)"
                    R"(<body><img alt="Picture caption"></body></html>)");
  EXPECT_EQ(t, (TokenStream{"quantum", "physics", "particle", "research"}));
}

TEST(Tokenize, TokensAreLowercaseAlphaAndNotStopWords) {
  auto t = tokenize("<p>The QUICK brown fox's 3 jumps, over; the lazy DOG &amp; cat &eacute;t&eacute;</p>");
  for (const auto& w : t) {
    EXPECT_GE(w.size(), kMinTokenLength);
    for (char c : w) EXPECT_TRUE(c >= 'a' && c <= 'z') << w;
    EXPECT_FALSE(StopList::builtin().contains(w)) << w;
  }
}

TEST(Porter, Examples) {
  EXPECT_EQ(porter_stem("caresses"), "caress");
  EXPECT_EQ(porter_stem("relational"), "relat");
  EXPECT_EQ(porter_stem("sky"), "sky");
}

TEST(Porter, ReferenceVocabulary) {
  std::ifstream voc(LINKTOPO_TEST_DATA "/porter_voc.txt"), out(LINKTOPO_TEST_DATA "/porter_output.txt");
  ASSERT_TRUE(voc && out);
  std::string w, s;
  std::size_t n = 0, bad = 0;
  while (std::getline(voc, w) && std::getline(out, s)) {
    ++n;
    if (porter_stem(w) != s) {
      if (++bad <= 10) ADD_FAILURE() << w << " -> " << porter_stem(w) << ", expected " << s;
    }
  }
  EXPECT_EQ(n, 23532u);
  EXPECT_EQ(bad, 0u);
}

TEST(TermCounts, Examples) {
  EXPECT_EQ(term_counts({"run", "running", "runs"}), (TermCounts{{"run", 3}}));
  EXPECT_TRUE(term_counts({}).empty());
  EXPECT_EQ(term_counts({"web", "web", "graph"}), (TermCounts{{"web", 2}, {"graph", 1}}));
}

TEST(TermCounts, MassConservation) {
  auto tokens = tokenize("Information retrieval systems retrieve relevant documents; relevance ranking "
                         "and retrieval evaluation measure the systems' effectiveness repeatedly.");
  auto counts = term_counts(tokens);
  std::size_t total = 0;
  for (const auto& [k, v] : counts) total += static_cast<std::size_t>(v);
  EXPECT_EQ(total, tokens.size());
}

TEST(StopWords, EmbeddedListMatchesResourceFile) {
  auto file = StopList::from_file(LINKTOPO_SOURCE_DIR "/resources/stopwords.txt");
  auto embedded = StopList::from_text(detail::kDefaultStopWords);
  EXPECT_EQ(file.size(), embedded.size());
  std::ifstream in(LINKTOPO_SOURCE_DIR "/resources/stopwords.txt");
  std::string w;
  while (std::getline(in, w))
    if (!w.empty() && w[0] != '#') EXPECT_TRUE(embedded.contains(w)) << w;
}
