//! Binary person × item response tables.

use std::collections::HashSet;

use crate::error::{domain, Error, Result};

/// A persons × items table of 0/1 responses with one label per item.
///
/// Rows are persons, columns are items. Storage is row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    values: Vec<u8>,
    labels: Vec<String>,
    persons: usize,
}

impl ResponseMatrix {
    /// Builds a matrix from row-major cells. Every cell must be 0 or 1 and
    /// labels must be unique.
    pub fn new(values: Vec<u8>, persons: usize, labels: Vec<String>) -> Result<Self> {
        let items = labels.len();
        if persons == 0 {
            return Err(Error::Empty("persons"));
        }
        if items == 0 {
            return Err(Error::Empty("items"));
        }
        if values.len() != persons * items {
            return domain(format!(
                "{} cells given for a {persons} x {items} matrix",
                values.len()
            ));
        }
        let mut seen = HashSet::with_capacity(items);
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryCell {
                row: pos / items,
                column: labels[pos % items].clone(),
                value: values[pos].to_string(),
            });
        }
        Ok(Self {
            values,
            labels,
            persons,
        })
    }

    /// Builds a matrix from rows, labelling items `item1`, `item2`, ...
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let items = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * items);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != items {
                return Err(Error::RaggedRow {
                    row: r,
                    expected: items,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(values, rows.len(), default_labels(items))
    }

    pub fn persons(&self) -> usize {
        self.persons
    }

    pub fn items(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, person: usize, item: usize) -> u8 {
        self.values[person * self.items() + item]
    }

    pub fn row(&self, person: usize) -> &[u8] {
        let n = self.items();
        &self.values[person * n..(person + 1) * n]
    }

    pub fn column(&self, item: usize) -> impl Iterator<Item = u8> + '_ {
        let n = self.items();
        self.values[item..].iter().step_by(n).copied()
    }

    /// Number of successes per item.
    pub fn item_totals(&self) -> Vec<usize> {
        let mut totals = vec![0usize; self.items()];
        for row in self.values.chunks_exact(self.items()) {
            for (t, &v) in totals.iter_mut().zip(row) {
                *t += v as usize;
            }
        }
        totals
    }

    /// Sum score of every person.
    pub fn person_scores(&self) -> Vec<usize> {
        self.values
            .chunks_exact(self.items())
            .map(|row| row.iter().map(|&v| v as usize).sum())
            .collect()
    }

    /// Returns an error naming the first item whose column is all-0 or all-1.
    pub fn check_no_constant_items(&self) -> Result<()> {
        for (i, &t) in self.item_totals().iter().enumerate() {
            if t == 0 || t == self.persons {
                return Err(Error::DegenerateItem {
                    label: self.labels[i].clone(),
                    value: u8::from(t != 0),
                });
            }
        }
        Ok(())
    }

    /// Restriction to the given item columns, in the given order.
    pub fn select_items(&self, items: &[usize]) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Empty("items"));
        }
        if let Some(&bad) = items.iter().find(|&&i| i >= self.items()) {
            return domain(format!("item index {bad} out of range 0..{}", self.items()));
        }
        let mut values = Vec::with_capacity(self.persons * items.len());
        for p in 0..self.persons {
            let row = self.row(p);
            values.extend(items.iter().map(|&i| row[i]));
        }
        let labels = items.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(values, self.persons, labels)
    }

    /// Restriction to the given person rows, in the given order.
    pub fn select_persons(&self, persons: &[usize]) -> Result<Self> {
        if persons.is_empty() {
            return Err(Error::Empty("persons"));
        }
        if let Some(&bad) = persons.iter().find(|&&p| p >= self.persons) {
            return domain(format!(
                "person index {bad} out of range 0..{}",
                self.persons
            ));
        }
        let mut values = Vec::with_capacity(persons.len() * self.items());
        for &p in persons {
            values.extend_from_slice(self.row(p));
        }
        Self::new(values, persons.len(), self.labels.clone())
    }

    /// Places the columns of `other` to the right of `self`. Person counts must match.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.persons != other.persons {
            return domain(format!(
                "cannot join {} persons with {} persons",
                self.persons, other.persons
            ));
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for p in 0..self.persons {
            values.extend_from_slice(self.row(p));
            values.extend_from_slice(other.row(p));
        }
        let labels = self.labels.iter().chain(&other.labels).cloned().collect();
        Self::new(values, self.persons, labels)
    }

    /// Same cells with new labels.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.items() {
            return domain("label count does not match item count");
        }
        let values = std::mem::take(&mut self.values);
        Self::new(values, self.persons, labels)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [u8] {
        &mut self.values
    }
}

/// `item1`, `item2`, ... up to `n`.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("item{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ResponseMatrix {
        ResponseMatrix::from_rows(&[vec![1, 0, 1], vec![0, 0, 1], vec![1, 1, 1]]).unwrap()
    }

    #[test]
    fn shape_and_totals() {
        let m = small();
        assert_eq!(m.persons(), 3);
        assert_eq!(m.items(), 3);
        assert_eq!(m.item_totals(), vec![2, 1, 3]);
        assert_eq!(m.person_scores(), vec![2, 1, 3]);
        assert_eq!(m.column(0).collect::<Vec<_>>(), vec![1, 0, 1]);
    }

    #[test]
    fn rejects_non_binary_and_duplicates() {
        let err = ResponseMatrix::new(vec![0, 2], 1, default_labels(2)).unwrap_err();
        assert!(matches!(err, Error::NonBinaryCell { row: 0, .. }));
        let err = ResponseMatrix::new(vec![0, 1], 1, vec!["a".into(), "a".into()]).unwrap_err();
        assert!(matches!(err, Error::DuplicateLabel(_)));
        let err = ResponseMatrix::from_rows(&[vec![0, 1], vec![1]]).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 1, .. }));
    }

    #[test]
    fn constant_column_is_named() {
        match small().check_no_constant_items() {
            Err(Error::DegenerateItem { label, value }) => {
                assert_eq!(label, "item3");
                assert_eq!(value, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn restriction_and_stack() {
        let m = small();
        let sub = m.select_items(&[2, 0]).unwrap();
        assert_eq!(sub.labels(), &["item3".to_string(), "item1".to_string()]);
        assert_eq!(sub.row(1), &[1, 0]);
        let rows = m.select_persons(&[2, 0]).unwrap();
        assert_eq!(rows.row(0), &[1, 1, 1]);
        assert!(m.select_items(&[3]).is_err());
        let other = sub.with_labels(vec!["x".into(), "y".into()]).unwrap();
        let joined = m.hstack(&other).unwrap();
        assert_eq!(joined.items(), 5);
        assert_eq!(joined.row(0), &[1, 0, 1, 1, 1]);
    }
}
