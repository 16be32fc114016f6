#pragma once

// The five reference queries, verbatim apart from line breaks.

namespace queries {

inline constexpr const char* kQ1 =
    "SELECT Object FROM Camera\n"
    "WHERE Object.label='Car'\n"
    "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5";

inline constexpr const char* kQ2 =
    "SELECT Object FROM Camera\n"
    "WHERE Object.label='Car'\n"
    "AND Object.attrcolor = 'Black'\n"
    "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5";

inline constexpr const char* kQ3 =
    "SELECT Left(Object1, Object2) FROM Camera\n"
    "WHERE Object1.label= 'Car' AND\n"
    "Object1.attrcolor = 'Black' AND\n"
    "Object2.label = 'Car' AND\n"
    "Object2.attrcolor = 'Not Black'\n"
    "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5";

inline constexpr const char* kQ4 =
    "SELECT SEQ(Object1, Object2) FROM Camera\n"
    "WHERE Object1.label= 'Car'\n"
    "AND Object2.label = 'Person'\n"
    "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5";

inline constexpr const char* kQ5 =
    "SELECT HIGH_TRAFFIC_FLOW(Object) FROM Camera\n"
    "WHERE Object.label= 'Car'\n"
    "AND COUNT(Object) > 5 FOR EACH FRAME\n"
    "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5";

inline constexpr const char* kAll[] = {kQ1, kQ2, kQ3, kQ4, kQ5};

}  // namespace queries
