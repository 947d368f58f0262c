//! Two-column profile files: `#`-prefixed metadata such as
//! `# support=S, class=H_j^n`, a header row, then one sample per line.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileCsv {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    pub support: Option<f64>,
    /// `[j, n]` from a `class=H_j^n` tag.
    pub class: Option<[usize; 2]>,
}

fn parse_class(tag: &str) -> Result<[usize; 2]> {
    let bad = || Error::Parse(format!("class tag `{tag}` is not of the form H_j^n"));
    let rest = tag.strip_prefix("H_").ok_or_else(bad)?;
    let (j, n) = rest.split_once('^').ok_or_else(bad)?;
    Ok([j.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?])
}

pub fn read_profile_csv(text: &str) -> Result<ProfileCsv> {
    let mut out = ProfileCsv::default();
    for line in text.lines().filter_map(|l| l.trim().strip_prefix('#')) {
        for item in line.split(',') {
            let Some((key, value)) = item.split_once('=') else { continue };
            match key.trim() {
                "support" => {
                    out.support = Some(value.trim().parse().map_err(|_| Error::Parse(format!("bad support `{value}`")))?)
                }
                "class" => out.class = Some(parse_class(value.trim())?),
                _ => {}
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() != 2 {
            return Err(Error::Parse(format!("row {}: expected two columns", row + 1)));
        }
        let num = |k: usize| {
            record[k]
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: `{}` is not a number", row + 1, &record[k])))
        };
        out.s.push(num(0)?);
        out.values.push(num(1)?);
    }
    if out.s.is_empty() {
        return Err(Error::Parse("profile has no samples".into()));
    }
    Ok(out)
}

/// Values are written with 17 significant digits.
pub fn write_profile_csv(data: &ProfileCsv, header: (&str, &str)) -> String {
    let mut meta = Vec::new();
    if let Some(s) = data.support {
        meta.push(format!("support={s:.16e}"));
    }
    if let Some([j, n]) = data.class {
        meta.push(format!("class=H_{j}^{n}"));
    }
    let mut out = String::new();
    if !meta.is_empty() {
        out.push_str(&format!("# {}\n", meta.join(", ")));
    }
    out.push_str(&format!("{},{}\n", header.0, header.1));
    for (s, v) in data.s.iter().zip(&data.values) {
        out.push_str(&format!("{s:.16e},{v:.16e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_lossless() {
        let data = ProfileCsv {
            s: vec![0.1, 0.2, 1.0 / 3.0],
            values: vec![1.0 / 7.0, -2.5e-17, 0.0],
            support: Some(1.0 / 3.0),
            class: Some([1, 3]),
        };
        let text = write_profile_csv(&data, ("s", "value"));
        assert!(text.starts_with("# support="));
        assert!(text.contains("class=H_1^3"));
        assert_eq!(read_profile_csv(&text).unwrap(), data);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_profile_csv("s,value\n0.1,abc\n"), Err(Error::Parse(_))));
        assert!(matches!(read_profile_csv("s,value\n"), Err(Error::Parse(_))));
        assert!(matches!(read_profile_csv("# class=K\ns,value\n0,1\n"), Err(Error::Parse(_))));
    }
}
