//! Spoken and written numbers.

fn unit(word: &str) -> Option<f64> {
    let v = match word {
        "zero" | "oh" => 0,
        "one" | "a" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        "nine" => 9,
        "ten" => 10,
        "eleven" => 11,
        "twelve" => 12,
        "thirteen" => 13,
        "fourteen" => 14,
        "fifteen" => 15,
        "sixteen" => 16,
        "seventeen" => 17,
        "eighteen" => 18,
        "nineteen" => 19,
        _ => return None,
    };
    Some(v as f64)
}

fn tens(word: &str) -> Option<f64> {
    let v = match word {
        "twenty" => 20,
        "thirty" => 30,
        "forty" => 40,
        "fifty" => 50,
        "sixty" => 60,
        "seventy" => 70,
        "eighty" => 80,
        "ninety" => 90,
        _ => return None,
    };
    Some(v as f64)
}

fn digit(word: &str) -> Option<f64> {
    unit(word).filter(|v| *v < 10.0 && word != "a" && word != "oh")
        .or_else(|| word.parse::<u8>().ok().filter(|d| *d < 10).map(f64::from))
}

fn numeral(word: &str) -> Option<f64> {
    let v: f64 = word.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Reads a number starting at `words[0]`. Returns the value and the number
/// of words consumed.
pub fn read_number(words: &[&str]) -> Option<(f64, usize)> {
    let first = *words.first()?;
    if let Some(v) = numeral(first) {
        return Some((v, 1));
    }
    // "a" only counts as one before "hundred"
    if first == "a" && words.get(1) != Some(&"hundred") {
        return None;
    }
    let mut i = 0;
    let mut value = 0.0;
    let mut any = false;
    if let Some(u) = unit(first) {
        value = u;
        i = 1;
        any = true;
        if words.get(1) == Some(&"hundred") {
            value *= 100.0;
            i = 2;
            if words.get(2) == Some(&"and") && words.get(3).is_some_and(|w| unit(w).is_some() || tens(w).is_some()) {
                i = 3;
            }
        }
    }
    if value == 0.0 || value >= 100.0 {
        if let Some(t) = words.get(i).and_then(|w| tens(w)) {
            value += t;
            i += 1;
            any = true;
            if let Some(u) = words.get(i).and_then(|w| unit(w)).filter(|u| *u > 0.0 && *u < 10.0) {
                if words[i] != "a" {
                    value += u;
                    i += 1;
                }
            }
        } else if value >= 100.0 {
            if let Some(u) = words.get(i).and_then(|w| unit(w)).filter(|_| words[i] != "a") {
                value += u;
                i += 1;
            }
        }
    }
    if !any {
        return None;
    }
    if words.get(i) == Some(&"point") {
        let mut scale = 0.1;
        let mut j = i + 1;
        while let Some(d) = words.get(j).and_then(|w| digit(w)) {
            value += d * scale;
            scale /= 10.0;
            j += 1;
        }
        if j > i + 1 {
            i = j;
        }
    }
    Some((value, i))
}
