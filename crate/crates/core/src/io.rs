//! CSV ingestion and export of response tables.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::ResponseMatrix;
use crate::error::{Error, Result};

/// Name of the optional leading column that identifies persons.
pub const PERSON_ID: &str = "person_id";

/// A response table together with person identifiers, if the file had them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub data: ResponseMatrix,
    pub person_ids: Option<Vec<String>>,
}

/// Reads a CSV file whose header names the items. Data rows are numbered
/// from 1 in error messages.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Table> {
    read_csv_from(File::open(path)?)
}

pub fn read_csv_from(reader: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Empty("header"));
    }
    let has_ids = header[0] == PERSON_ID;
    let labels: Vec<String> = header[has_ids as usize..].to_vec();
    if labels.is_empty() {
        return Err(Error::Empty("items"));
    }
    let mut values = Vec::new();
    let mut ids = Vec::new();
    let mut persons = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut cells = record.iter();
        if has_ids {
            ids.push(cells.next().unwrap_or_default().to_string());
        }
        for (cell, label) in cells.zip(&labels) {
            values.push(match cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::NonBinaryCell {
                        row,
                        column: label.clone(),
                        value: other.to_string(),
                    })
                }
            });
        }
        persons += 1;
    }
    if persons == 0 {
        return Err(Error::Empty("persons"));
    }
    Ok(Table {
        data: ResponseMatrix::new(values, persons, labels)?,
        person_ids: has_ids.then_some(ids),
    })
}

pub fn write_csv(path: impl AsRef<Path>, table: &Table) -> Result<()> {
    write_csv_to(File::create(path)?, table)
}

pub fn write_csv_to(writer: impl Write, table: &Table) -> Result<()> {
    let data = &table.data;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Vec::with_capacity(data.items() + 1);
    if table.person_ids.is_some() {
        header.push(PERSON_ID);
    }
    header.extend(data.labels().iter().map(String::as_str));
    w.write_record(&header)?;
    for p in 0..data.persons() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        if let Some(ids) = &table.person_ids {
            record.push(ids[p].clone());
        }
        record.extend(data.row(p).iter().map(u8::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
