//! JSON Lines readers/writers for venues, profiles and contexts; TREC qrels.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{
    Aspect, Comment, ContextPair, ContextSchema, CorpusError, Gender, Preprocessor, Qrels, Rating,
    RatingScale, UserProfile, Venue, VenueStats,
};

type Result<T> = std::result::Result<T, CorpusError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))
}

/// Non-blank lines with 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_object(line: usize, text: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CorpusError::record(line, "<record>", "expected a JSON object")),
        Err(e) => Err(CorpusError::record(line, "<record>", e.to_string())),
    }
}

fn req_str(obj: &Map<String, Value>, line: usize, field: &str) -> Result<String> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        Some(Value::String(_)) => Err(CorpusError::record(line, field, "must be non-empty")),
        Some(_) => Err(CorpusError::record(line, field, "expected a string")),
        None => Err(CorpusError::record(line, field, "missing")),
    }
}

fn opt_count(obj: &Map<String, Value>, line: usize, field: &str) -> Result<Option<u64>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .or_else(|| {
                // tolerate integral floats such as 12.0
                v.as_f64()
                    .filter(|f| *f >= 0.0 && f.fract() == 0.0 && *f < 9.0e15)
                    .map(|f| f as u64)
            })
            .map(Some)
            .ok_or_else(|| CorpusError::record(line, field, "expected a non-negative integer")),
    }
}

fn str_list(obj: &Map<String, Value>, line: usize, field: &str) -> Result<Vec<String>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| CorpusError::record(line, field, "expected an array of strings"))
            })
            .collect(),
        Some(_) => Err(CorpusError::record(line, field, "expected an array of strings")),
    }
}

pub fn parse_venues(text: &str, pre: &Preprocessor) -> Result<Vec<Venue>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in records(text) {
        let obj = parse_object(line, rec)?;
        let id = req_str(&obj, line, "id")?;
        let name = match obj.get("name") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(CorpusError::record(line, "name", "expected a string")),
        };
        let rating_avg = match obj.get("rating_avg") {
            None | Some(Value::Null) => None,
            Some(v) => match v.as_f64() {
                Some(r) if (0.0..=10.0).contains(&r) => Some(r),
                _ => {
                    return Err(CorpusError::record(line, "rating_avg", "expected a number in [0, 10]"))
                }
            },
        };
        let stats = VenueStats {
            checkins: opt_count(&obj, line, "checkins")?,
            likes: opt_count(&obj, line, "likes")?,
            comment_count: opt_count(&obj, line, "comment_count")?,
            photos: opt_count(&obj, line, "photos")?,
            rating_avg,
            unique_users: opt_count(&obj, line, "unique_users")?,
        };
        let comments = str_list(&obj, line, "comments")?
            .into_iter()
            .map(|raw| Comment::new(raw, pre))
            .collect();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::Duplicate { kind: "venue", id });
        }
        out.push(Venue {
            id,
            name,
            stats,
            comments,
        });
    }
    Ok(out)
}

pub fn load_venues(path: impl AsRef<Path>, pre: &Preprocessor) -> Result<Vec<Venue>> {
    parse_venues(&read(path.as_ref())?, pre)
}

pub fn parse_profiles(text: &str, scale: &RatingScale) -> Result<Vec<UserProfile>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in records(text) {
        let obj = parse_object(line, rec)?;
        let user_id = req_str(&obj, line, "user_id")?;
        let gender = match req_str(&obj, line, "gender")?.to_lowercase().as_str() {
            "male" | "m" => Gender::Male,
            "female" | "f" => Gender::Female,
            other => {
                return Err(CorpusError::record(
                    line,
                    "gender",
                    format!("expected male|female, got '{other}'"),
                ))
            }
        };
        let mut ratings = Vec::new();
        let mut rated = HashSet::new();
        let items = match obj.get("ratings") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(a)) => a.clone(),
            Some(_) => return Err(CorpusError::record(line, "ratings", "expected an array")),
        };
        for item in items {
            let Value::Object(r) = item else {
                return Err(CorpusError::record(line, "ratings", "expected objects"));
            };
            let venue_id = req_str(&r, line, "venue_id").map_err(|_| {
                CorpusError::record(line, "ratings.venue_id", "expected a non-empty string")
            })?;
            let rating = r
                .get("rating")
                .and_then(Value::as_i64)
                .ok_or_else(|| CorpusError::record(line, "ratings.rating", "expected an integer"))?;
            if !scale.contains(rating) {
                return Err(CorpusError::record(
                    line,
                    "ratings.rating",
                    format!("{rating} outside scale {}..={}", scale.min, scale.max),
                ));
            }
            if !rated.insert(venue_id.clone()) {
                return Err(CorpusError::record(
                    line,
                    "ratings.venue_id",
                    format!("venue '{venue_id}' rated twice"),
                ));
            }
            ratings.push(Rating { venue_id, rating });
        }
        if !seen.insert(user_id.clone()) {
            return Err(CorpusError::Duplicate { kind: "user", id: user_id });
        }
        out.push(UserProfile {
            user_id,
            gender,
            ratings,
        });
    }
    Ok(out)
}

pub fn load_profiles(path: impl AsRef<Path>, scale: &RatingScale) -> Result<Vec<UserProfile>> {
    parse_profiles(&read(path.as_ref())?, scale)
}

pub fn parse_contexts(text: &str, schema: &ContextSchema) -> Result<Vec<ContextPair>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in records(text) {
        let obj = parse_object(line, rec)?;
        let topic_id = req_str(&obj, line, "topic_id")?;
        let user_id = req_str(&obj, line, "user_id")?;
        let candidates = str_list(&obj, line, "candidates")?;
        let mut context = BTreeMap::new();
        match obj.get("context") {
            None | Some(Value::Null) => {}
            Some(Value::Object(m)) => {
                for (k, v) in m {
                    let aspect: Aspect = k
                        .parse()
                        .map_err(|_| CorpusError::record(line, format!("context.{k}"), "unknown aspect"))?;
                    let dim = v.as_str().ok_or_else(|| {
                        CorpusError::record(line, format!("context.{k}"), "expected a string")
                    })?;
                    if context.insert(aspect, schema.resolve(aspect, dim)?).is_some() {
                        return Err(CorpusError::record(
                            line,
                            format!("context.{k}"),
                            "aspect given more than once",
                        ));
                    }
                }
            }
            Some(_) => return Err(CorpusError::record(line, "context", "expected an object")),
        }
        if !seen.insert(topic_id.clone()) {
            return Err(CorpusError::Duplicate { kind: "topic", id: topic_id });
        }
        out.push(ContextPair {
            topic_id,
            user_id,
            context,
            candidates,
        });
    }
    Ok(out)
}

pub fn load_contexts(path: impl AsRef<Path>, schema: &ContextSchema) -> Result<Vec<ContextPair>> {
    parse_contexts(&read(path.as_ref())?, schema)
}

/// "<topic_id> 0 <venue_id> <grade>" per line.
pub fn parse_qrels(text: &str) -> Result<Qrels> {
    let mut q = Qrels::new();
    for (line, rec) in records(text) {
        if rec.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = rec.split_whitespace().collect();
        let [topic, _iter, venue, grade] = fields.as_slice() else {
            return Err(CorpusError::record(line, "<record>", format!("expected 4 fields, got {}", fields.len())));
        };
        let grade: i64 = grade
            .parse()
            .ok()
            .filter(|g| *g >= 0)
            .ok_or_else(|| CorpusError::record(line, "grade", format!("expected an integer >= 0, got '{grade}'")))?;
        if !q.insert(topic, venue, grade) {
            return Err(CorpusError::Duplicate {
                kind: "judgment",
                id: format!("{topic}/{venue}"),
            });
        }
    }
    Ok(q)
}

pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    parse_qrels(&read(path.as_ref())?)
}

pub fn write_venues<W: Write>(w: &mut W, venues: &[Venue]) -> io::Result<()> {
    for v in venues {
        let mut obj = Map::new();
        obj.insert("id".into(), json!(v.id));
        obj.insert("name".into(), json!(v.name));
        let s = &v.stats;
        for (k, val) in [
            ("checkins", s.checkins),
            ("likes", s.likes),
            ("comment_count", s.comment_count),
            ("photos", s.photos),
            ("unique_users", s.unique_users),
        ] {
            if let Some(x) = val {
                obj.insert(k.into(), json!(x));
            }
        }
        if let Some(r) = s.rating_avg {
            obj.insert("rating_avg".into(), json!(r));
        }
        let comments: Vec<&str> = v.comments.iter().map(|c| c.raw.as_str()).collect();
        obj.insert("comments".into(), json!(comments));
        writeln!(w, "{}", Value::Object(obj))?;
    }
    Ok(())
}

pub fn write_profiles<W: Write>(w: &mut W, profiles: &[UserProfile]) -> io::Result<()> {
    for p in profiles {
        let ratings: Vec<Value> = p
            .ratings
            .iter()
            .map(|r| json!({"venue_id": r.venue_id, "rating": r.rating}))
            .collect();
        let obj = json!({"user_id": p.user_id, "gender": p.gender.as_str(), "ratings": ratings});
        writeln!(w, "{obj}")?;
    }
    Ok(())
}

pub fn write_contexts<W: Write>(w: &mut W, contexts: &[ContextPair]) -> io::Result<()> {
    for c in contexts {
        let ctx: Map<String, Value> = c
            .context
            .iter()
            .map(|(a, d)| (a.as_str().to_string(), json!(d)))
            .collect();
        let obj = json!({
            "topic_id": c.topic_id,
            "user_id": c.user_id,
            "candidates": c.candidates,
            "context": ctx,
        });
        writeln!(w, "{obj}")?;
    }
    Ok(())
}

pub fn write_qrels<W: Write>(w: &mut W, qrels: &Qrels) -> io::Result<()> {
    for (t, v, g) in qrels.iter() {
        writeln!(w, "{t} 0 {v} {g}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn venue_with_comments() {
        let pre = Preprocessor::default();
        let text = r#"{"id":"v1","name":"Cafe","checkins":10,"likes":2,"rating_avg":8.5,"comments":["Great coffee","Family friendly place"]}"#;
        let vs = parse_venues(text, &pre).unwrap();
        assert_eq!(vs.len(), 1);
        let v = &vs[0];
        assert_eq!(v.comments.len(), 2);
        assert_eq!(v.comments[1].tokens, ["famili", "friendli", "place"]);
        assert_eq!(v.stats.checkins, Some(10));
        assert_eq!(v.stats.photos, None);
        assert_eq!(v.stats.rating_avg, Some(8.5));
    }

    #[test]
    fn venue_errors_name_line_and_field() {
        let pre = Preprocessor::default();
        let text = "{\"id\":\"v1\"}\n{\"id\":\"v2\",\"likes\":-3}\n";
        match parse_venues(text, &pre) {
            Err(CorpusError::Record { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "likes");
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_venues("{\"name\":\"x\"}", &pre) {
            Err(CorpusError::Record { field, .. }) => assert_eq!(field, "id"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_venues("{\"id\":\"a\"}\n{\"id\":\"a\"}", &pre),
            Err(CorpusError::Duplicate { kind: "venue", .. })
        ));
        assert!(matches!(
            parse_venues("not json", &pre),
            Err(CorpusError::Record { line: 1, .. })
        ));
    }

    #[test]
    fn context_records() {
        let schema = ContextSchema::default();
        let ok = r#"{"topic_id":"t1","user_id":"u1","candidates":["v1"],"context":{"season":"summer","group":"family"}}"#;
        let cs = parse_contexts(ok, &schema).unwrap();
        assert_eq!(cs[0].context.len(), 2);
        assert_eq!(cs[0].dimension(Aspect::Season), Some("summer"));
        assert_eq!(cs[0].dimension(Aspect::Group), Some("family"));
        assert_eq!(cs[0].dimension(Aspect::Type), None);

        let bad = r#"{"topic_id":"t1","user_id":"u1","candidates":[],"context":{"season":"monday"}}"#;
        assert!(matches!(
            parse_contexts(bad, &schema),
            Err(CorpusError::IllegalDimension { .. })
        ));
        let unknown = r#"{"topic_id":"t1","user_id":"u1","context":{"mood":"happy"}}"#;
        assert!(matches!(parse_contexts(unknown, &schema), Err(CorpusError::Record { .. })));
    }

    #[test]
    fn profiles_and_scale() {
        let scale = RatingScale::default();
        let text = r#"{"user_id":"u1","gender":"Female","ratings":[{"venue_id":"a","rating":4},{"venue_id":"b","rating":0}]}"#;
        let ps = parse_profiles(text, &scale).unwrap();
        assert_eq!(ps[0].gender, Gender::Female);
        assert_eq!(ps[0].ratings.len(), 2);
        let out_of_scale = r#"{"user_id":"u1","gender":"male","ratings":[{"venue_id":"a","rating":5}]}"#;
        assert!(parse_profiles(out_of_scale, &scale).is_err());
        assert!(parse_profiles(out_of_scale, &RatingScale { min: 1, max: 5 }).is_ok());
        let twice = r#"{"user_id":"u1","gender":"male","ratings":[{"venue_id":"a","rating":1},{"venue_id":"a","rating":2}]}"#;
        assert!(parse_profiles(twice, &scale).is_err());
    }

    #[test]
    fn qrels_format() {
        let q = parse_qrels("t1 0 v1 2\nt1 0 v2 0\n\nt2 0 v1 1\n").unwrap();
        assert_eq!(q.grade("t1", "v1"), Some(2));
        assert_eq!(q.len(), 3);
        assert!(matches!(parse_qrels("t1 0 v1"), Err(CorpusError::Record { line: 1, .. })));
        assert!(matches!(parse_qrels("t1 0 v1 x"), Err(CorpusError::Record { .. })));
        assert!(matches!(
            parse_qrels("t1 0 v1 1\nt1 0 v1 2"),
            Err(CorpusError::Duplicate { .. })
        ));
    }

    #[test]
    fn round_trip_all_record_kinds() {
        let pre = Preprocessor::default();
        let schema = ContextSchema::default();
        let scale = RatingScale::default();
        let venues = parse_venues(
            concat!(
                r#"{"id":"v1","name":"A","checkins":3,"comment_count":1,"photos":0,"rating_avg":7.25,"unique_users":9,"comments":["Nice pumpkin soup"]}"#,
                "\n",
                r#"{"id":"v2","name":"B","comments":[]}"#
            ),
            &pre,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_venues(&mut buf, &venues).unwrap();
        assert_eq!(parse_venues(std::str::from_utf8(&buf).unwrap(), &pre).unwrap(), venues);

        let profiles = parse_profiles(
            r#"{"user_id":"u","gender":"male","ratings":[{"venue_id":"v1","rating":3}]}"#,
            &scale,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_profiles(&mut buf, &profiles).unwrap();
        assert_eq!(parse_profiles(std::str::from_utf8(&buf).unwrap(), &scale).unwrap(), profiles);

        let contexts = parse_contexts(
            r#"{"topic_id":"t","user_id":"u","candidates":["v1","v2"],"context":{"duration":"night time","type":"holiday"}}"#,
            &schema,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_contexts(&mut buf, &contexts).unwrap();
        assert_eq!(parse_contexts(std::str::from_utf8(&buf).unwrap(), &schema).unwrap(), contexts);

        let qrels = parse_qrels("t 0 v1 1\nt 0 v2 0\n").unwrap();
        let mut buf = Vec::new();
        write_qrels(&mut buf, &qrels).unwrap();
        assert_eq!(parse_qrels(std::str::from_utf8(&buf).unwrap()).unwrap(), qrels);
    }
}
