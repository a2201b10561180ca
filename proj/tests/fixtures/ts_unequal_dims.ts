@problemName ragged
@univariate false
@classLabel true A B
@data
1,2,3:4,5:A
