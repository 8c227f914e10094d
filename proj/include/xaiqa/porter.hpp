#pragma once

#include <string>
#include <string_view>

namespace xaiqa {

// Porter stemmer, following Martin Porter's reference C implementation
// (including its two published departures from the original 1980 description: "bli" -> "ble"
// in step 2 in place of "abli" -> "able", and the extra "logi" -> "log"
// rule). Words of length <= 2 are returned unchanged. Input is expected to
// be lowercase ASCII letters; anything containing other characters is
// returned as is.
class PorterStemmer {
 public:
  std::string operator()(std::string_view word) const {
    for (char c : word) {
      if (c < 'a' || c > 'z') return std::string(word);
    }
    if (word.size() <= 2) return std::string(word);
    State s{std::string(word), static_cast<int>(word.size()) - 1, 0};
    s.step1ab();
    if (s.k > 0) {
      s.step1c();
      s.step2();
      s.step3();
      s.step4();
      s.step5();
    }
    return s.b.substr(0, static_cast<std::size_t>(s.k + 1));
  }

 private:
  struct State {
    std::string b;
    int k;  // end of the current stem (inclusive)
    int j;  // end of the stem before a matched suffix

    bool cons(int i) const {
      switch (b[static_cast<std::size_t>(i)]) {
        case 'a': case 'e': case 'i': case 'o': case 'u':
          return false;
        case 'y':
          return i == 0 ? true : !cons(i - 1);
        default:
          return true;
      }
    }

    // Number of VC sequences in b[0..j].
    int m() const {
      int n = 0;
      int i = 0;
      for (;;) {
        if (i > j) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
      for (;;) {
        for (;;) {
          if (i > j) return n;
          if (cons(i)) break;
          ++i;
        }
        ++i;
        ++n;
        for (;;) {
          if (i > j) return n;
          if (!cons(i)) break;
          ++i;
        }
        ++i;
      }
    }

    bool vowel_in_stem() const {
      for (int i = 0; i <= j; ++i) {
        if (!cons(i)) return true;
      }
      return false;
    }

    bool double_consonant(int i) const {
      if (i < 1) return false;
      if (b[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(i - 1)]) return false;
      return cons(i);
    }

    // consonant-vowel-consonant ending at i, where the last consonant is not w, x or y
    bool cvc(int i) const {
      if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
      const char ch = b[static_cast<std::size_t>(i)];
      return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view suffix) {
      const int len = static_cast<int>(suffix.size());
      if (len > k + 1) return false;
      if (std::string_view(b).substr(static_cast<std::size_t>(k - len + 1), suffix.size()) != suffix) return false;
      j = k - len;
      return true;
    }

    void set_to(std::string_view s) {
      b.replace(static_cast<std::size_t>(j + 1), static_cast<std::size_t>(k - j), s);
      k = j + static_cast<int>(s.size());
      b.resize(static_cast<std::size_t>(k + 1));
    }

    void r(std::string_view s) {
      if (m() > 0) set_to(s);
    }

    char at(int i) const { return b[static_cast<std::size_t>(i)]; }

    void step1ab() {
      if (at(k) == 's') {
        if (ends("sses")) {
          k -= 2;
        } else if (ends("ies")) {
          set_to("i");
        } else if (at(k - 1) != 's') {
          --k;
        }
      }
      if (ends("eed")) {
        if (m() > 0) --k;
      } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
        k = j;
        if (ends("at")) {
          set_to("ate");
        } else if (ends("bl")) {
          set_to("ble");
        } else if (ends("iz")) {
          set_to("ize");
        } else if (double_consonant(k)) {
          --k;
          const char ch = at(k);
          if (ch == 'l' || ch == 's' || ch == 'z') ++k;
        } else if (m() == 1 && cvc(k)) {
          set_to("e");
        }
      }
      b.resize(static_cast<std::size_t>(k + 1));
    }

    void step1c() {
      if (ends("y") && vowel_in_stem()) b[static_cast<std::size_t>(k)] = 'i';
    }

    void step2() {
      if (k < 1) return;
      switch (at(k - 1)) {
        case 'a':
          if (ends("ational")) { r("ate"); break; }
          if (ends("tional")) { r("tion"); break; }
          break;
        case 'c':
          if (ends("enci")) { r("ence"); break; }
          if (ends("anci")) { r("ance"); break; }
          break;
        case 'e':
          if (ends("izer")) { r("ize"); break; }
          break;
        case 'l':
          if (ends("bli")) { r("ble"); break; }
          if (ends("alli")) { r("al"); break; }
          if (ends("entli")) { r("ent"); break; }
          if (ends("eli")) { r("e"); break; }
          if (ends("ousli")) { r("ous"); break; }
          break;
        case 'o':
          if (ends("ization")) { r("ize"); break; }
          if (ends("ation")) { r("ate"); break; }
          if (ends("ator")) { r("ate"); break; }
          break;
        case 's':
          if (ends("alism")) { r("al"); break; }
          if (ends("iveness")) { r("ive"); break; }
          if (ends("fulness")) { r("ful"); break; }
          if (ends("ousness")) { r("ous"); break; }
          break;
        case 't':
          if (ends("aliti")) { r("al"); break; }
          if (ends("iviti")) { r("ive"); break; }
          if (ends("biliti")) { r("ble"); break; }
          break;
        case 'g':
          if (ends("logi")) { r("log"); break; }
          break;
        default:
          break;
      }
    }

    void step3() {
      switch (at(k)) {
        case 'e':
          if (ends("icate")) { r("ic"); break; }
          if (ends("ative")) { r(""); break; }
          if (ends("alize")) { r("al"); break; }
          break;
        case 'i':
          if (ends("iciti")) { r("ic"); break; }
          break;
        case 'l':
          if (ends("ical")) { r("ic"); break; }
          if (ends("ful")) { r(""); break; }
          break;
        case 's':
          if (ends("ness")) { r(""); break; }
          break;
        default:
          break;
      }
    }

    void step4() {
      if (k < 1) return;
      switch (at(k - 1)) {
        case 'a':
          if (ends("al")) break;
          return;
        case 'c':
          if (ends("ance")) break;
          if (ends("ence")) break;
          return;
        case 'e':
          if (ends("er")) break;
          return;
        case 'i':
          if (ends("ic")) break;
          return;
        case 'l':
          if (ends("able")) break;
          if (ends("ible")) break;
          return;
        case 'n':
          if (ends("ant")) break;
          if (ends("ement")) break;
          if (ends("ment")) break;
          if (ends("ent")) break;
          return;
        case 'o':
          if (ends("ion") && j >= 0 && (at(j) == 's' || at(j) == 't')) break;
          if (ends("ou")) break;
          return;
        case 's':
          if (ends("ism")) break;
          return;
        case 't':
          if (ends("ate")) break;
          if (ends("iti")) break;
          return;
        case 'u':
          if (ends("ous")) break;
          return;
        case 'v':
          if (ends("ive")) break;
          return;
        case 'z':
          if (ends("ize")) break;
          return;
        default:
          return;
      }
      if (m() > 1) k = j;
    }

    void step5() {
      j = k;
      if (at(k) == 'e') {
        const int a = m();
        if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
      }
      if (at(k) == 'l' && double_consonant(k) && m() > 1) --k;
    }
  };
};

inline std::string porter_stem(std::string_view word) { return PorterStemmer{}(word); }

}  // namespace xaiqa
