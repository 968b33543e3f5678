//! The four itinerary actions and their text and JSON forms.
//!
//! Text form, one action per non-blank line:
//!
//! ```text
//! go_to_place(origin, destination, depart_time, arrive_time)
//! visit(place, begin_time, end_time)
//! go_to_city(origin, destination, depart_time, arrive_time, ticket)
//! stay_in(city, begin_time, end_time)
//! ```
//!
//! Arguments are separated by commas; surrounding whitespace is ignored.
//! Names may not contain commas or parentheses.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Calendar, TimePoint};
use crate::world::is_valid_name;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    GoToPlace { origin: String, destination: String, depart: TimePoint, arrive: TimePoint },
    Visit { place: String, begin: TimePoint, end: TimePoint },
    GoToCity {
        origin: String,
        destination: String,
        depart: TimePoint,
        arrive: TimePoint,
        ticket: String,
    },
    StayIn { city: String, begin: TimePoint, end: TimePoint },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::GoToPlace { .. } => "go_to_place",
            Action::Visit { .. } => "visit",
            Action::GoToCity { .. } => "go_to_city",
            Action::StayIn { .. } => "stay_in",
        }
    }

    pub fn start(&self) -> TimePoint {
        match self {
            Action::GoToPlace { depart, .. } | Action::GoToCity { depart, .. } => *depart,
            Action::Visit { begin, .. } | Action::StayIn { begin, .. } => *begin,
        }
    }

    pub fn end(&self) -> TimePoint {
        match self {
            Action::GoToPlace { arrive, .. } | Action::GoToCity { arrive, .. } => *arrive,
            Action::Visit { end, .. } | Action::StayIn { end, .. } => *end,
        }
    }

    /// Moving or sightseeing, as opposed to staying put.
    pub fn is_activity(&self) -> bool {
        !matches!(self, Action::StayIn { .. })
    }

    pub fn render(&self, cal: &Calendar) -> String {
        let t = |x: &TimePoint| cal.render(*x);
        match self {
            Action::GoToPlace { origin, destination, depart, arrive } => {
                format!("go_to_place({origin}, {destination}, {}, {})", t(depart), t(arrive))
            }
            Action::Visit { place, begin, end } => {
                format!("visit({place}, {}, {})", t(begin), t(end))
            }
            Action::GoToCity { origin, destination, depart, arrive, ticket } => format!(
                "go_to_city({origin}, {destination}, {}, {}, {ticket})",
                t(depart),
                t(arrive)
            ),
            Action::StayIn { city, begin, end } => {
                format!("stay_in({city}, {}, {})", t(begin), t(end))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Itinerary {
    pub actions: Vec<Action>,
}

impl Itinerary {
    pub fn new(actions: Vec<Action>) -> Self {
        Itinerary { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Action> {
        self.actions.iter()
    }
}

impl From<Vec<Action>> for Itinerary {
    fn from(actions: Vec<Action>) -> Self {
        Itinerary { actions }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

fn arity(name: &str) -> Option<usize> {
    match name {
        "go_to_place" => Some(4),
        "visit" => Some(3),
        "go_to_city" => Some(5),
        "stay_in" => Some(3),
        _ => None,
    }
}

fn parse_line(line: &str, cal: &Calendar) -> Result<Action, String> {
    let open = line.find('(').ok_or("expected `name(arg, ...)`")?;
    let name = line[..open].trim();
    let rest = line[open + 1..].trim_end();
    let inner = rest.strip_suffix(')').ok_or("missing closing `)`")?;
    if inner.contains('(') || inner.contains(')') {
        return Err("arguments may not contain parentheses".into());
    }
    let expected = arity(name).ok_or_else(|| format!("unknown action `{name}`"))?;
    let args: Vec<&str> =
        if inner.trim().is_empty() { Vec::new() } else { inner.split(',').map(str::trim).collect() };
    if args.len() != expected {
        return Err(format!("`{name}` takes {expected} arguments, got {}", args.len()));
    }
    build_action(name, &args, cal)
}

fn build_action(name: &str, args: &[&str], cal: &Calendar) -> Result<Action, String> {
    let ident = |s: &str| -> Result<String, String> {
        if is_valid_name(s) {
            Ok(s.to_string())
        } else {
            Err(format!("invalid name `{s}`"))
        }
    };
    let time = |s: &str| cal.parse(s).map_err(|e| e.to_string());
    let action = match name {
        "go_to_place" => Action::GoToPlace {
            origin: ident(args[0])?,
            destination: ident(args[1])?,
            depart: time(args[2])?,
            arrive: time(args[3])?,
        },
        "visit" => Action::Visit { place: ident(args[0])?, begin: time(args[1])?, end: time(args[2])? },
        "go_to_city" => Action::GoToCity {
            origin: ident(args[0])?,
            destination: ident(args[1])?,
            depart: time(args[2])?,
            arrive: time(args[3])?,
            ticket: ident(args[4])?,
        },
        "stay_in" => Action::StayIn { city: ident(args[0])?, begin: time(args[1])?, end: time(args[2])? },
        other => return Err(format!("unknown action `{other}`")),
    };
    if action.start() >= action.end() {
        return Err("start time must precede end time".into());
    }
    Ok(action)
}

/// Parses the text form; on failure every offending line is reported.
pub fn parse_itinerary(text: &str, cal: &Calendar) -> Result<Itinerary, ParseError> {
    let mut actions = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line.trim(), cal) {
            Ok(a) => actions.push(a),
            Err(message) => diagnostics.push(Diagnostic { line: i + 1, message }),
        }
    }
    if diagnostics.is_empty() {
        Ok(Itinerary { actions })
    } else {
        Err(ParseError { diagnostics })
    }
}

/// Canonical text form: one action per line, `", "` separators, trailing newline
/// after each action.
pub fn render_itinerary(it: &Itinerary, cal: &Calendar) -> String {
    let mut out = String::new();
    for a in &it.actions {
        out.push_str(&a.render(cal));
        out.push('\n');
    }
    out
}

/// Machine form of one action: `{"action": "visit", "args": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "args", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionJson {
    GoToPlace(GoToPlaceArgs),
    Visit(VisitArgs),
    GoToCity(GoToCityArgs),
    StayIn(StayInArgs),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoToPlaceArgs {
    pub origin: String,
    pub destination: String,
    pub depart_time: String,
    pub arrive_time: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisitArgs {
    pub place: String,
    pub begin_time: String,
    pub end_time: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoToCityArgs {
    pub origin: String,
    pub destination: String,
    pub depart_time: String,
    pub arrive_time: String,
    pub ticket: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StayInArgs {
    pub city: String,
    pub begin_time: String,
    pub end_time: String,
}

impl ActionJson {
    pub fn from_action(a: &Action, cal: &Calendar) -> ActionJson {
        let t = |x: &TimePoint| cal.render(*x);
        match a {
            Action::GoToPlace { origin, destination, depart, arrive } => {
                ActionJson::GoToPlace(GoToPlaceArgs {
                    origin: origin.clone(),
                    destination: destination.clone(),
                    depart_time: t(depart),
                    arrive_time: t(arrive),
                })
            }
            Action::Visit { place, begin, end } => {
                ActionJson::Visit(VisitArgs { place: place.clone(), begin_time: t(begin), end_time: t(end) })
            }
            Action::GoToCity { origin, destination, depart, arrive, ticket } => {
                ActionJson::GoToCity(GoToCityArgs {
                    origin: origin.clone(),
                    destination: destination.clone(),
                    depart_time: t(depart),
                    arrive_time: t(arrive),
                    ticket: ticket.clone(),
                })
            }
            Action::StayIn { city, begin, end } => {
                ActionJson::StayIn(StayInArgs { city: city.clone(), begin_time: t(begin), end_time: t(end) })
            }
        }
    }

    pub fn to_action(&self, cal: &Calendar) -> Result<Action, String> {
        match self {
            ActionJson::GoToPlace(GoToPlaceArgs { origin, destination, depart_time, arrive_time }) => build_action(
                "go_to_place",
                &[origin, destination, depart_time, arrive_time],
                cal,
            ),
            ActionJson::Visit(VisitArgs { place, begin_time, end_time }) => {
                build_action("visit", &[place, begin_time, end_time], cal)
            }
            ActionJson::GoToCity(GoToCityArgs { origin, destination, depart_time, arrive_time, ticket }) => {
                build_action("go_to_city", &[origin, destination, depart_time, arrive_time, ticket], cal)
            }
            ActionJson::StayIn(StayInArgs { city, begin_time, end_time }) => {
                build_action("stay_in", &[city, begin_time, end_time], cal)
            }
        }
    }
}

pub fn itinerary_to_json(it: &Itinerary, cal: &Calendar) -> Vec<ActionJson> {
    it.actions.iter().map(|a| ActionJson::from_action(a, cal)).collect()
}

pub fn itinerary_from_json(items: &[ActionJson], cal: &Calendar) -> Result<Itinerary, ParseError> {
    let mut actions = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item.to_action(cal) {
            Ok(a) => actions.push(a),
            Err(message) => diagnostics.push(Diagnostic { line: i + 1, message }),
        }
    }
    if diagnostics.is_empty() {
        Ok(Itinerary { actions })
    } else {
        Err(ParseError { diagnostics })
    }
}

/// Parses either form: a JSON array of action objects, or the text form.
pub fn parse_any(text: &str, cal: &Calendar) -> Result<Itinerary, ParseError> {
    if text.trim_start().starts_with('[') {
        match serde_json::from_str::<Vec<ActionJson>>(text) {
            Ok(items) => itinerary_from_json(&items, cal),
            Err(e) => Err(ParseError {
                diagnostics: vec![Diagnostic { line: e.line(), message: e.to_string() }],
            }),
        }
    } else {
        parse_itinerary(text, cal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal() -> Calendar {
        Calendar::parse_date("07-01").unwrap()
    }

    #[test]
    fn parses_table_example() {
        let it = parse_itinerary(
            "go_to_city(Shanghai, Beijing, 07-01 14:40, 07-01 20:30, G2305)",
            &cal(),
        )
        .unwrap();
        assert_eq!(
            it.actions,
            vec![Action::GoToCity {
                origin: "Shanghai".into(),
                destination: "Beijing".into(),
                depart: TimePoint::at(0, 14, 40),
                arrive: TimePoint::at(0, 20, 30),
                ticket: "G2305".into(),
            }]
        );
    }

    #[test]
    fn empty_text_is_empty_itinerary() {
        assert!(parse_itinerary("", &cal()).unwrap().is_empty());
        assert!(parse_itinerary("\n  \n", &cal()).unwrap().is_empty());
    }

    #[test]
    fn visit_arity_error_reports_line() {
        let err = parse_itinerary("visit(Museum, 07-01 10:00)", &cal()).unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        assert_eq!(err.diagnostics[0].line, 1);
        assert!(err.diagnostics[0].message.contains("3 arguments"));
    }

    #[test]
    fn collects_all_diagnostics() {
        let text = "fly(A, B)\nstay_in(Beijing, 07-01 08:00, 07-02 08:00)\n\nvisit(X, 07-01 9:00, 07-01 10:00)\nvisit(X, 07-01 11:00, 07-01 10:00)";
        let err = parse_itinerary(text, &cal()).unwrap_err();
        let lines: Vec<usize> = err.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, [1, 4, 5]);
        assert!(err.diagnostics[0].message.contains("unknown action"));
    }

    #[test]
    fn whitespace_is_tolerated() {
        let it = parse_itinerary("  stay_in( Beijing ,07-01 08:00 ,  07-02 08:00 )  ", &cal()).unwrap();
        assert_eq!(render_itinerary(&it, &cal()), "stay_in(Beijing, 07-01 08:00, 07-02 08:00)\n");
    }

    #[test]
    fn render_examples() {
        assert_eq!(render_itinerary(&Itinerary::default(), &cal()), "");
        let it = Itinerary::new(vec![Action::StayIn {
            city: "Beijing".into(),
            begin: TimePoint::at(0, 8, 0),
            end: TimePoint::at(1, 8, 0),
        }]);
        assert_eq!(render_itinerary(&it, &cal()).trim_end(), "stay_in(Beijing, 07-01 08:00, 07-02 08:00)");
    }

    #[test]
    fn json_form() {
        let text = r#"[{"action": "visit", "args": {"place": "Bund", "begin_time": "07-01 10:00", "end_time": "07-01 11:00"}}]"#;
        let it = parse_any(text, &cal()).unwrap();
        assert_eq!(it.actions[0].name(), "visit");
        let back = serde_json::to_string(&itinerary_to_json(&it, &cal())).unwrap();
        assert_eq!(parse_any(&back, &cal()).unwrap(), it);
        let bad = r#"[{"action": "visit", "args": {"place": "Bund", "begin_time": "07-01 10:00"}}]"#;
        assert!(parse_any(bad, &cal()).is_err());
    }

    fn name() -> impl Strategy<Value = String> {
        "[A-Za-z0-9][A-Za-z0-9 _-]{0,10}[A-Za-z0-9]".prop_map(|s| s)
    }

    fn span() -> impl Strategy<Value = (TimePoint, TimePoint)> {
        (0u32..20_000, 1u32..3_000).prop_map(|(a, d)| (TimePoint(a), TimePoint(a + d)))
    }

    pub(crate) fn action() -> impl Strategy<Value = Action> {
        prop_oneof![
            (name(), name(), span()).prop_map(|(o, d, (s, e))| Action::GoToPlace {
                origin: o,
                destination: d,
                depart: s,
                arrive: e
            }),
            (name(), span()).prop_map(|(p, (s, e))| Action::Visit { place: p, begin: s, end: e }),
            (name(), name(), span(), "[A-Z]{1,2}[0-9]{1,4}").prop_map(|(o, d, (s, e), t)| {
                Action::GoToCity { origin: o, destination: d, depart: s, arrive: e, ticket: t }
            }),
            (name(), span()).prop_map(|(c, (s, e))| Action::StayIn { city: c, begin: s, end: e }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn text_round_trip(actions in proptest::collection::vec(action(), 0..8)) {
            let it = Itinerary::new(actions);
            let text = render_itinerary(&it, &cal());
            let back = parse_itinerary(&text, &cal()).unwrap();
            prop_assert_eq!(&back, &it);
            prop_assert_eq!(render_itinerary(&back, &cal()), text);
        }

        #[test]
        fn parsing_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_itinerary(&text, &cal());
            let _ = parse_any(&text, &cal());
        }
    }
}
