use super::table::{Column, SeriesTable};
use crate::error::{Error, Result};

/// Result of [`align_and_fill`].
#[derive(Debug, Clone, PartialEq)]
pub struct Filled {
    pub table: SeriesTable,
    /// Leading dates removed because some column had no earlier observation.
    pub dropped_leading: usize,
}

/// Forward-fills gaps in every non-target column (market-closed days take
/// the last traded value). Leading dates before a column's first observation
/// are dropped. The target column must be complete.
pub fn align_and_fill(table: &SeriesTable, target: &str) -> Result<Filled> {
    let target_idx = table.column_index(target)?;
    if let Some(i) = table.columns()[target_idx]
        .values
        .iter()
        .position(Option::is_none)
    {
        return Err(Error::Data(format!(
            "target column {target:?} is missing a value on {}",
            table.dates()[i]
        )));
    }
    let mut start = 0;
    for c in table.columns() {
        let first = c
            .values
            .iter()
            .position(Option::is_some)
            .ok_or_else(|| Error::Data(format!("column {:?} has no observations", c.name)))?;
        start = start.max(first);
    }
    let trimmed = table.slice(start..table.len());
    let columns = trimmed
        .columns()
        .iter()
        .map(|c| {
            let mut last = None;
            let values = c
                .values
                .iter()
                .map(|v| {
                    if v.is_some() {
                        last = *v;
                    }
                    last
                })
                .collect();
            Column {
                name: c.name.clone(),
                values,
            }
        })
        .collect();
    Ok(Filled {
        table: SeriesTable::new(trimmed.dates().to_vec(), columns)?,
        dropped_leading: start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn dates(n: usize) -> Vec<NaiveDate> {
        // 2020-01-03 is a Friday.
        let start = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        (0..n)
            .map(|i| start + chrono::Days::new(i as u64))
            .collect()
    }

    fn col(name: &str, v: &[Option<f64>]) -> Column {
        Column {
            name: name.into(),
            values: v.to_vec(),
        }
    }

    #[test]
    fn weekend_gap_repeats_friday() {
        let t = SeriesTable::new(
            dates(4),
            vec![
                col("close", &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
                col("sp500", &[Some(3200.0), None, None, Some(3210.0)]),
            ],
        )
        .unwrap();
        let f = align_and_fill(&t, "close").unwrap();
        assert_eq!(f.dropped_leading, 0);
        assert_eq!(
            f.table.dense_column("sp500").unwrap(),
            vec![3200.0, 3200.0, 3200.0, 3210.0]
        );
    }

    #[test]
    fn complete_table_unchanged() {
        let t = SeriesTable::new(
            dates(3),
            vec![col("close", &[Some(1.0), Some(2.0), Some(3.0)])],
        )
        .unwrap();
        let f = align_and_fill(&t, "close").unwrap();
        assert_eq!(f.table, t);
        assert_eq!(f.dropped_leading, 0);
    }

    #[test]
    fn leading_gap_drops_dates() {
        let t = SeriesTable::new(
            dates(5),
            vec![
                col(
                    "close",
                    &[Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
                ),
                col("vix", &[None, None, Some(20.0), None, Some(21.0)]),
            ],
        )
        .unwrap();
        let f = align_and_fill(&t, "close").unwrap();
        assert_eq!(f.dropped_leading, 2);
        assert_eq!(f.table.dates(), &dates(5)[2..]);
        assert_eq!(f.table.dense_column("vix").unwrap(), vec![20.0, 20.0, 21.0]);
    }

    #[test]
    fn empty_column_and_target_gaps_are_errors() {
        let t = SeriesTable::new(
            dates(2),
            vec![
                col("close", &[Some(1.0), Some(2.0)]),
                col("gvz", &[None, None]),
            ],
        )
        .unwrap();
        assert!(matches!(align_and_fill(&t, "close"), Err(Error::Data(_))));

        let t = SeriesTable::new(dates(2), vec![col("close", &[Some(1.0), None])]).unwrap();
        assert!(matches!(align_and_fill(&t, "close"), Err(Error::Data(_))));
        assert!(matches!(align_and_fill(&t, "open"), Err(Error::Schema(_))));
    }

    #[test]
    fn idempotent() {
        let t = SeriesTable::new(
            dates(5),
            vec![
                col(
                    "close",
                    &[Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
                ),
                col("vix", &[None, Some(7.0), None, None, Some(9.0)]),
            ],
        )
        .unwrap();
        let once = align_and_fill(&t, "close").unwrap().table;
        let twice = align_and_fill(&once, "close").unwrap();
        assert_eq!(twice.table, once);
        assert_eq!(twice.dropped_leading, 0);
    }
}
