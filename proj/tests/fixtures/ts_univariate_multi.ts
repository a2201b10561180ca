@problemName liar
@univariate true
@classLabel true A B
@data
1,2:3,4:A
